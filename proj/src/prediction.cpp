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


#include "komei/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "komei/error.hpp"

namespace komei {

ClassifierParams ClassifierParams::create(std::size_t n_categories, std::size_t d_g,
                                          std::mt19937_64& rng) {
  if (n_categories == 0) throw ConfigError("classifier needs at least one category");
  ClassifierParams c;
  c.h = std::make_shared<Parameter>(
      "cls.h", random_normal(n_categories, d_g, 1.0 / std::sqrt(static_cast<double>(d_g)), rng));
  c.w = std::make_shared<Parameter>("cls.w", Tensor2(1, d_g, 1.0), true, false);
  c.b = std::make_shared<Parameter>("cls.b", Tensor2(1, 1), true, false);
  return c;
}

Var class_logits(Var fused, const ClassifierParams& cls) {
  Tape& t = fused.tape();
  if (fused.cols() != cls.h->value.cols()) {
    throw DimensionError("class_logits: fused " + fused.value().shape_string() +
                         " vs class embeddings " + cls.h->value.shape_string());
  }
  // w . (h_j (*) H_b) = H_b . (h_j (*) w)
  const Var scaled = mul(t.param(*cls.h), t.param(*cls.w));
  return add(matmul_nt(fused, scaled), t.param(*cls.b));
}

Var predict_scores(Var fused, const ClassifierParams& cls) {
  return softmax_rows(class_logits(fused, cls));
}

Tensor2 predict_scores(const Tensor2& fused, const ClassifierParams& cls) {
  Tape tape;
  return predict_scores(tape.constant(fused), cls).value();
}

Var prediction_loss_from_logits(Var logits, std::span<const std::size_t> gold) {
  return nll_mean(log_softmax_rows(logits), gold);
}

double prediction_loss(const Tensor2& probs, std::span<const std::size_t> gold) {
  if (gold.size() != probs.rows() || gold.empty()) {
    throw DimensionError("prediction_loss: label count does not match " + probs.shape_string());
  }
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (gold[r] >= probs.cols()) throw DomainError("prediction_loss: label out of range");
    total -= std::log(probs(r, gold[r]));
  }
  return total / static_cast<double>(probs.rows());
}

Var total_loss(Var l_p, std::optional<Var> l_ti, std::optional<Var> l_ts, const LossWeights& w) {
  if (!(w.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (w.beta < 0.0 || w.gamma < 0.0) throw ConfigError("beta and gamma must be non-negative");
  Var j = scale(l_p, w.alpha);
  if (l_ti && w.beta != 0.0) j = add(j, scale(*l_ti, w.beta));
  if (l_ts && w.gamma != 0.0) j = add(j, scale(*l_ts, w.gamma));
  return j;
}

bool top_k_hit(std::span<const double> scores, std::size_t gold, std::size_t k) {
  if (k == 0 || k > scores.size()) throw DomainError("top_k_hit: k out of range");
  if (gold >= scores.size()) throw DomainError("top_k_hit: gold out of range");
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > scores[gold] || (scores[j] == scores[gold] && j < gold)) ++ahead;
  }
  return ahead < k;
}

std::vector<std::size_t> ranked_categories(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace komei
