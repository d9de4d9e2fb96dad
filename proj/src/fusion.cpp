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


#include "komei/fusion.hpp"

#include <cmath>
#include <unordered_set>

#include "komei/error.hpp"

namespace komei {

AttentionParams AttentionParams::create(const std::string& prefix, std::size_t d_g,
                                        std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d_g));
  AttentionParams p;
  p.wq = std::make_shared<Parameter>(prefix + ".wq", random_normal(d_g, d_g, s, rng));
  p.wk = std::make_shared<Parameter>(prefix + ".wk", random_normal(d_g, d_g, s, rng));
  p.wv = std::make_shared<Parameter>(prefix + ".wv", random_normal(d_g, d_g, s, rng));
  return p;
}

GateParams GateParams::create(std::size_t d_g, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d_g));
  GateParams g;
  g.w_r = std::make_shared<Parameter>("gu.w_r", random_normal(d_g, d_g, s, rng));
  g.b_r = std::make_shared<Parameter>("gu.b_r", Tensor2(1, d_g), true, false);
  g.w_g = std::make_shared<Parameter>("gu.w_g", random_normal(d_g, d_g, s, rng));
  g.b_g = std::make_shared<Parameter>("gu.b_g", Tensor2(1, d_g), true, false);
  return g;
}

AddNormParams AddNormParams::create(const std::string& prefix, std::size_t d_g) {
  AddNormParams a;
  a.gain = std::make_shared<Parameter>(prefix + ".gain", Tensor2(1, d_g, 1.0), true, false);
  a.bias = std::make_shared<Parameter>(prefix + ".bias", Tensor2(1, d_g), true, false);
  return a;
}

FusionParams FusionParams::create(const FusionLayout& layout, std::mt19937_64& rng) {
  const std::size_t d = layout.d_g;
  FusionParams f;
  if (layout.sa && !layout.gu) throw ConfigError("self-attention refinement requires the gated unit");
  if (layout.gu && !layout.ca) throw ConfigError("gated unit requires cross-modal attention");

  if (layout.ca) {
    if (layout.image) f.ca_ti = AttentionParams::create("ca.ti", d, rng);
    if (layout.speech) f.ca_ts = AttentionParams::create("ca.ts", d, rng);
  }
  auto add_norms = [&](const std::string& stage, std::optional<AddNormParams>& ti,
                       std::optional<AddNormParams>& ts) {
    if (layout.share_an) {
      const AddNormParams shared = AddNormParams::create(stage, d);
      if (layout.image) ti = shared;
      if (layout.speech) ts = shared;
    } else {
      if (layout.image) ti = AddNormParams::create(stage + ".ti", d);
      if (layout.speech) ts = AddNormParams::create(stage + ".ts", d);
    }
  };
  if (layout.gu) {
    f.gate = GateParams::create(d, rng);
    add_norms("an_gu", f.an_gu_ti, f.an_gu_ts);
  }
  if (layout.sa) {
    if (layout.image) f.sa_ti = AttentionParams::create("sa.ti", d, rng);
    if (layout.speech) f.sa_ts = AttentionParams::create("sa.ts", d, rng);
    add_norms("an_sa", f.an_sa_ti, f.an_sa_ts);
  }
  const std::size_t in = layout.concat_blocks * d;
  f.w_h = std::make_shared<Parameter>("fuse.w_h",
                                      random_normal(in, d, 1.0 / std::sqrt(static_cast<double>(in)), rng));
  f.b_h = std::make_shared<Parameter>("fuse.b_h", Tensor2(1, d), true, false);
  return f;
}

std::vector<ParamPtr> FusionParams::parameters() const {
  std::vector<ParamPtr> out;
  std::unordered_set<const Parameter*> seen;
  auto push = [&](const ParamPtr& p) {
    if (p && seen.insert(p.get()).second) out.push_back(p);
  };
  auto attn = [&](const std::optional<AttentionParams>& a) {
    if (a) {
      push(a->wq);
      push(a->wk);
      push(a->wv);
    }
  };
  auto an = [&](const std::optional<AddNormParams>& a) {
    if (a) {
      push(a->gain);
      push(a->bias);
    }
  };
  attn(ca_ti);
  attn(ca_ts);
  if (gate) {
    push(gate->w_r);
    push(gate->b_r);
    push(gate->w_g);
    push(gate->b_g);
  }
  an(an_gu_ti);
  an(an_gu_ts);
  attn(sa_ti);
  attn(sa_ts);
  an(an_sa_ti);
  an(an_sa_ts);
  push(w_h);
  push(b_h);
  return out;
}

std::size_t fusion_parameter_count(const FusionLayout& l) {
  const std::size_t d = l.d_g;
  const std::size_t pairs = static_cast<std::size_t>(l.image) + static_cast<std::size_t>(l.speech);
  const std::size_t an_copies = pairs == 0 ? 0 : (l.share_an ? 1 : pairs);
  std::size_t n = l.concat_blocks * d * d + d;
  if (l.ca) n += pairs * 3 * d * d;
  if (l.gu) n += 2 * (d * d + d) + an_copies * 2 * d;
  if (l.sa) n += pairs * 3 * d * d + an_copies * 2 * d;
  return n;
}

std::size_t count_scalars(std::span<const ParamPtr> params) {
  std::unordered_set<const Parameter*> seen;
  std::size_t n = 0;
  for (const auto& p : params) {
    if (p && seen.insert(p.get()).second) n += p->value.size();
  }
  return n;
}

Tensor2 match_matrix(std::span<const std::string> keys) {
  Tensor2 m(keys.size(), keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = 0; j < keys.size(); ++j) m(i, j) = keys[i] == keys[j] ? 1.0 : 0.0;
  }
  return m;
}

Var contrastive_align_loss(Var text, Var evidence, const Tensor2& match, const AlignmentConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("contrastive temperature must be positive");
  const std::size_t b = text.rows();
  if (evidence.rows() != b || match.rows() != b || match.cols() != b) {
    throw DimensionError("contrastive_align_loss: batch of " + std::to_string(b) + " with " +
                         evidence.value().shape_string() + " evidence and " + match.shape_string() +
                         " match matrix");
  }
  double matched = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < b; ++j) row += match(i, j);
    if (row <= 0.0) throw DomainError("contrastive_align_loss: sample without a positive pair");
    matched += row;
  }
  const Var logits = scale(cosine_similarity(text, evidence), 1.0 / cfg.tau);
  const Var logp = log_softmax_rows(logits);
  const double w = cfg.reduction == AlignmentConfig::Reduction::mean ? -1.0 / matched : -1.0;
  Tensor2 weights = match;
  for (double& v : weights.data()) v *= w;
  return weighted_sum(logp, weights);
}

Var cross_modal_attention(Var text, Var evidence, std::span<const Segment> segs,
                          const AttentionParams& p) {
  Tape& t = text.tape();
  const Var q = matmul(text, t.param(*p.wq));
  const Var k = matmul(evidence, t.param(*p.wk));
  const Var v = matmul(evidence, t.param(*p.wv));
  return segment_attention(q, k, v, segs);
}

Var gated_unit(Var m, const GateParams& gate, const AddNormParams& an, double eps) {
  Tape& t = m.tape();
  const Var r = relu(linear(m, t.param(*gate.w_r), t.param(*gate.b_r)));
  const Var g = sigmoid(linear(r, t.param(*gate.w_g), t.param(*gate.b_g)));
  const Var gated = mul(g, m);
  return layer_norm(add(gated, m), t.param(*an.gain), t.param(*an.bias), eps);
}

Var self_attend_refine(Var m, const AttentionParams& p, const AddNormParams& an, double eps) {
  Tape& t = m.tape();
  std::vector<Segment> segs(m.rows());
  for (std::size_t i = 0; i < segs.size(); ++i) segs[i] = Segment{i, i + 1};
  const Var q = matmul(m, t.param(*p.wq));
  const Var k = matmul(m, t.param(*p.wk));
  const Var v = matmul(m, t.param(*p.wv));
  const Var attended = segment_attention(q, k, v, segs);
  return layer_norm(add(attended, m), t.param(*an.gain), t.param(*an.bias), eps);
}

Var fuse(std::span<const std::optional<Var>> blocks, Parameter& w_h, Parameter& b_h) {
  const std::optional<Var>* first = nullptr;
  for (const auto& b : blocks) {
    if (b) {
      first = &b;
      break;
    }
  }
  if (first == nullptr) throw ConfigError("fuse: every branch is absent");
  Tape& t = (*first)->tape();
  const std::size_t rows = (*first)->rows();
  const std::size_t d = w_h.value.cols();
  if (w_h.value.rows() != blocks.size() * d) {
    throw DimensionError("fuse: W_H " + w_h.value.shape_string() + " does not take " +
                         std::to_string(blocks.size()) + " blocks of width " + std::to_string(d));
  }
  std::vector<Var> parts;
  parts.reserve(blocks.size());
  for (const auto& b : blocks) parts.push_back(b ? *b : t.constant(Tensor2(rows, d)));
  return linear(concat_cols(parts), t.param(w_h),
                t.param(b_h));
}

Var fuse(std::optional<Var> ti, std::optional<Var> ts, Parameter& w_h, Parameter& b_h) {
  const std::optional<Var> blocks[2] = {ti, ts};
  return fuse(std::span<const std::optional<Var>>(blocks), w_h, b_h);
}

}  // namespace komei
