// Copyright 2026 The komei Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "komei/autograd.hpp"

namespace komei {

/// logit_j = w . (h_j (*) H) + b over the n category representations h_j.
struct ClassifierParams {
  ParamPtr h;  // n x d_g
  ParamPtr w;  // 1 x d_g
  ParamPtr b;  // 1 x 1

  /// h ~ N(0, 1/d_g), w = 1, b = 0. Throws ConfigError for n = 0.
  static ClassifierParams create(std::size_t n_categories, std::size_t d_g, std::mt19937_64& rng);
  std::size_t categories() const { return h->value.rows(); }
};

struct LossWeights {
  double alpha = 1.0;
  double beta = 0.1;
  double gamma = 0.1;
};

Var class_logits(Var fused, const ClassifierParams& cls);
/// Row-wise softmax of class_logits.
Var predict_scores(Var fused, const ClassifierParams& cls);
Tensor2 predict_scores(const Tensor2& fused, const ClassifierParams& cls);

/// Mean over the batch of -log p[gold]; computed from logits for stability.
Var prediction_loss_from_logits(Var logits, std::span<const std::size_t> gold);
double prediction_loss(const Tensor2& probs, std::span<const std::size_t> gold);

/// alpha L_P + beta L_TI + gamma L_TS; absent alignment terms contribute 0.
Var total_loss(Var l_p, std::optional<Var> l_ti, std::optional<Var> l_ts, const LossWeights& w);

/// Whether gold is among the k highest scores. Ties rank the lower category
/// index first. Requires 1 <= k <= row size.
bool top_k_hit(std::span<const double> scores, std::size_t gold, std::size_t k);

/// Category indices sorted by descending score, ties by ascending index.
std::vector<std::size_t> ranked_categories(std::span<const double> scores);

}  // namespace komei
