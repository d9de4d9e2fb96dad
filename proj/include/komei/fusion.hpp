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

// Dynamic fusion: contrastive text/evidence alignment, text-queried
// cross-modal attention, a sigmoid gated unit with residual add-norm, a
// per-sample self-attention refinement with its own add-norm, and a linear
// fusion over the concatenated branch outputs.

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "komei/autograd.hpp"

namespace komei {

struct AttentionParams {
  ParamPtr wq, wk, wv;  // each d_g x d_g

  static AttentionParams create(const std::string& prefix, std::size_t d_g, std::mt19937_64& rng);
};

struct GateParams {
  ParamPtr w_r, b_r;  // R(X) = ReLU(X W_R + b_R)
  ParamPtr w_g, b_g;  // g = sigmoid(R W_G + b_G)

  static GateParams create(std::size_t d_g, std::mt19937_64& rng);
};

/// Residual add followed by layer normalization.
struct AddNormParams {
  ParamPtr gain, bias;  // 1 x d_g

  static AddNormParams create(const std::string& prefix, std::size_t d_g);
};

struct AlignmentConfig {
  enum class Reduction { mean, sum };

  double tau = 0.07;
  Reduction reduction = Reduction::mean;
};

/// Which parts of the stack exist. concat_blocks is the number of d_g-wide
/// blocks entering the fusion matrix (2 for the attention stack, 3 for the
/// plain concatenation baseline).
struct FusionLayout {
  std::size_t d_g = 64;
  bool image = true;
  bool speech = true;
  bool ca = true;
  bool gu = true;
  bool sa = true;
  bool share_an = true;
  std::size_t concat_blocks = 2;
};

struct FusionParams {
  std::optional<AttentionParams> ca_ti, ca_ts;
  std::optional<GateParams> gate;  // one gate shared by both branches
  std::optional<AddNormParams> an_gu_ti, an_gu_ts;
  std::optional<AttentionParams> sa_ti, sa_ts;
  std::optional<AddNormParams> an_sa_ti, an_sa_ts;
  ParamPtr w_h;  // (concat_blocks * d_g) x d_g
  ParamPtr b_h;  // 1 x d_g

  /// With share_an the TI and TS add-norm slots point at the same Parameter
  /// objects; otherwise each branch owns its own.
  static FusionParams create(const FusionLayout& layout, std::mt19937_64& rng);

  /// Distinct parameters in a fixed order.
  std::vector<ParamPtr> parameters() const;
};

/// Closed-form trainable parameter count of FusionParams::create(layout).
std::size_t fusion_parameter_count(const FusionLayout& layout);

/// Number of distinct scalars across the given parameters.
std::size_t count_scalars(std::span<const ParamPtr> params);

/// match[i][j] = 1 when keys[i] == keys[j].
Tensor2 match_matrix(std::span<const std::string> keys);

/// In-batch contrastive loss between text rows and pooled evidence rows:
///   -sum_{match(i,j)} log softmax_j(cos(T_i, E_j) / tau)
/// divided by the number of matched pairs under Reduction::mean.
Var contrastive_align_loss(Var text, Var evidence, const Tensor2& match, const AlignmentConfig& cfg);

/// Per sample b: softmax((T_b W_q)(E W_k)^T / sqrt(d)) (E W_v) over segs[b].
Var cross_modal_attention(Var text, Var evidence, std::span<const Segment> segs,
                          const AttentionParams& p);

/// AN(sigmoid(ReLU(M W_R + b_R) W_G + b_G) * M + M).
Var gated_unit(Var m, const GateParams& gate, const AddNormParams& an, double eps);

/// Each row is its own length-1 sequence: AN(SA(M W_q, M W_k, M W_v) + M).
Var self_attend_refine(Var m, const AttentionParams& p, const AddNormParams& an, double eps);

/// (block_0 ; block_1 ; ...) W_H + b_H with absent blocks replaced by zeros.
/// Throws ConfigError if every block is absent.
Var fuse(std::span<const std::optional<Var>> blocks, Parameter& w_h, Parameter& b_h);
Var fuse(std::optional<Var> ti, std::optional<Var> ts, Parameter& w_h, Parameter& b_h);

}  // namespace komei
