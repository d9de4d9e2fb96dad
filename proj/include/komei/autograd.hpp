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

// Reverse-mode differentiation over a recorded tape. Every op appends a node
// holding its forward value and a closure that pushes the node's gradient into
// its inputs. A tape serves exactly one forward pass and one backward call.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "komei/tensor.hpp"

namespace komei {

struct Parameter {
  Parameter(std::string name, Tensor2 value, bool trainable = true, bool decay = true);

  std::string name;
  Tensor2 value;
  Tensor2 grad;  // same shape as value
  bool trainable = true;
  bool decay = true;  // subject to AdamW weight decay

  void zero_grad() { grad.fill(0.0); }
};

using ParamPtr = std::shared_ptr<Parameter>;

/// Half-open row range [begin, end) selecting one sample's sequence.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const noexcept { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor2& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  /// Leaf reading the parameter's current value. Gradients reach p.grad on
  /// backward() when p is trainable; frozen parameters get nothing.
  Var param(Parameter& p);

  Var record(Tensor2 value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor2 value, std::span<const Var> inputs, Backward backward);

  const Tensor2& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient buffer of a node; only valid inside backward().
  Tensor2& grad(std::size_t id) { return grads_[id]; }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. loss must be 1x1.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor2> grads_;
  bool consumed_ = false;
};

// ---- differentiable ops ---------------------------------------------------
// Shape errors throw DimensionError naming both shapes.

Var matmul(Var a, Var b);     // a[m x k] * b[k x n]
Var matmul_nt(Var a, Var b);  // a[m x k] * b[n x k]^T
/// Elementwise sum. b may also be a 1 x cols row or a 1 x 1 scalar broadcast.
Var add(Var a, Var b);
/// Elementwise product. b may also be a 1 x cols row broadcast.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var x);  // subgradient 0 at 0
Var sigmoid(Var x);
Var linear(Var x, Var w, Var b);  // x * w + b
Var softmax_rows(Var x);
Var log_softmax_rows(Var x);
/// Per-row standardization to mean 0 / population variance 1, then gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps);
/// softmax(q k^T / sqrt(d)) v with every query attending every key.
Var attention(Var q, Var k, Var v);
/// Query row i attends only to key/value rows in segs[i].
Var segment_attention(Var q, Var k, Var v, std::span<const Segment> segs);
/// Row i of the result is the mean of x over segs[i].
Var segment_mean(Var x, std::span<const Segment> segs);
Var concat_cols(std::span<const Var> parts);
/// Cosine similarity matrix [a.rows x b.rows]. Zero-norm rows score 0.
Var cosine_similarity(Var a, Var b);
/// Scalar sum of weights (*) x over all entries.
Var weighted_sum(Var x, const Tensor2& weights);
/// Mean over rows of -log_probs[r][gold[r]].
Var nll_mean(Var log_probs, std::span<const std::size_t> gold);
/// Row i is the mean of table rows ids[i].
Var embedding_bag_mean(Var table, const std::vector<std::vector<std::size_t>>& ids);

// ---- plain-tensor conveniences (run a private tape) ------------------------

Tensor2 linear(const Tensor2& x, const Tensor2& w, const Tensor2& b);
Tensor2 relu(const Tensor2& x);
Tensor2 softmax_rows(const Tensor2& x);
Tensor2 layer_norm(const Tensor2& x, const Tensor2& gain, const Tensor2& bias, double eps);
Tensor2 attention(const Tensor2& q, const Tensor2& k, const Tensor2& v);

}  // namespace komei
