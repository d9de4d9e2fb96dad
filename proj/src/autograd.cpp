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


#include "komei/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "komei/error.hpp"
#include "komei/util.hpp"
#include "linalg.hpp"

namespace komei {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;

Parameter::Parameter(std::string name_, Tensor2 value_, bool trainable_, bool decay_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(value.rows(), value.cols()),
      trainable(trainable_),
      decay(decay_) {}

const Tensor2& Var::value() const { return tape_->value(id_); }

// ---- tape ------------------------------------------------------------------

Var Tape::constant(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, &p, p.trainable});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor2 value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor2 value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw Error("Tape::record: input belongs to another tape");
    needs = needs || nodes_[in.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), needs ? std::move(backward) : Backward{}, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (consumed_) throw Error("Tape::backward called twice");
  if (&loss.tape() != this) throw Error("Tape::backward: loss belongs to another tape");
  const Tensor2& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("Tape::backward: loss must be 1x1, got " + lv.shape_string());
  }
  consumed_ = true;
  grads_.resize(nodes_.size());
  for (std::size_t i = 0; i <= loss.id(); ++i) {
    if (nodes_[i].needs_grad) grads_[i] = Tensor2(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  if (!nodes_[loss.id()].needs_grad) return;
  grads_[loss.id()](0, 0) = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr && n.param->trainable) {
      auto dst = n.param->grad.data();
      const auto src = grads_[i].data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

// ---- helpers -----------------------------------------------------------------

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor2& a, const Tensor2& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                       b.shape_string());
}

void add_into(Tensor2& dst, const Tensor2& src) {
  auto d = dst.data();
  const auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void softmax_inplace(std::span<double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : row) v /= total;
}

void check_segments(std::span<const Segment> segs, std::size_t rows, const char* op) {
  for (const auto& s : segs) {
    if (s.begin > s.end || s.end > rows) {
      throw DimensionError(std::string(op) + ": segment outside " + std::to_string(rows) + " rows");
    }
    if (s.size() == 0) throw EmptyEvidenceError(std::string(op) + ": empty segment");
  }
}

}  // namespace

// ---- ops -----------------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor2& av = a.value();
  const Tensor2& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Tensor2 out(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.needs_grad(ia)) gemm_nt(g, t.value(ib), t.grad(ia));
    if (t.needs_grad(ib)) gemm_tn(t.value(ia), g, t.grad(ib));
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor2& av = a.value();
  const Tensor2& bv = b.value();
  if (av.cols() != bv.cols()) shape_error("matmul_nt", av, bv);
  Tensor2 out(av.rows(), bv.rows());
  gemm_nt(av, bv, out);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.needs_grad(ia)) gemm_nn(g, t.value(ib), t.grad(ia));
    if (t.needs_grad(ib)) gemm_tn(g, t.value(ia), t.grad(ib));
  });
}

Var add(Var a, Var b) {
  const Tensor2& av = a.value();
  const Tensor2& bv = b.value();
  enum class Mode { same, row, scalar } mode;
  if (av.same_shape(bv)) {
    mode = Mode::same;
  } else if (bv.rows() == 1 && bv.cols() == av.cols()) {
    mode = Mode::row;
  } else if (bv.rows() == 1 && bv.cols() == 1) {
    mode = Mode::scalar;
  } else {
    shape_error("add", av, bv);
  }
  Tensor2 out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(r, c) += mode == Mode::same ? bv(r, c) : mode == Mode::row ? bv(0, c) : bv(0, 0);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, mode](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.needs_grad(ia)) add_into(t.grad(ia), g);
    if (!t.needs_grad(ib)) return;
    Tensor2& gb = t.grad(ib);
    if (mode == Mode::same) {
      add_into(gb, g);
      return;
    }
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) {
        (mode == Mode::row ? gb(0, c) : gb(0, 0)) += g(r, c);
      }
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor2& av = a.value();
  const Tensor2& bv = b.value();
  const bool row = !av.same_shape(bv);
  if (row && !(bv.rows() == 1 && bv.cols() == av.cols())) shape_error("mul", av, bv);
  Tensor2 out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= row ? bv(0, c) : bv(r, c);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, row](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& av = t.value(ia);
    const Tensor2& bv = t.value(ib);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) {
        const double bval = row ? bv(0, c) : bv(r, c);
        if (t.needs_grad(ia)) t.grad(ia)(r, c) += g(r, c) * bval;
        if (t.needs_grad(ib)) (row ? t.grad(ib)(0, c) : t.grad(ib)(r, c)) += g(r, c) * av(r, c);
      }
    }
  });
}

Var scale(Var a, double s) {
  Tensor2 out = a.value();
  for (double& v : out.data()) v *= s;
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s](Tape& t, std::size_t self) {
    const auto g = t.grad(self).data();
    auto ga = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var relu(Var x) {
  Tensor2 out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, std::size_t self) {
    const auto g = t.grad(self).data();
    const auto xv = t.value(ix).data();
    auto gx = t.grad(ix).data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

Var sigmoid(Var x) {
  Tensor2 out = x.value();
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, std::size_t self) {
    const auto g = t.grad(self).data();
    const auto y = t.value(self).data();
    auto gx = t.grad(ix).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var linear(Var x, Var w, Var b) {
  if (x.cols() != w.rows()) shape_error("linear", x.value(), w.value());
  if (b.rows() != 1 || b.cols() != w.cols()) shape_error("linear(bias)", w.value(), b.value());
  return add(matmul(x, w), b);
}

Var softmax_rows(Var x) {
  Tensor2 out = x.value();
  if (out.cols() == 0) throw DomainError("softmax_rows: empty row");
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.row_span(r));
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& y = t.value(self);
    Tensor2& gx = t.grad(ix);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double inner = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) inner += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += y(r, c) * (g(r, c) - inner);
    }
  });
}

Var log_softmax_rows(Var x) {
  Tensor2 out = x.value();
  if (out.cols() == 0) throw DomainError("log_softmax_rows: empty row");
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    const double m = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - m);
    const double lse = m + std::log(total);
    for (double& v : row) v -= lse;
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& y = t.value(self);
    Tensor2& gx = t.grad(ix);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) gsum += g(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += g(r, c) - std::exp(y(r, c)) * gsum;
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor2& xv = x.value();
  const std::size_t d = xv.cols();
  if (d == 0) throw DomainError("layer_norm: zero-width input");
  if (!(eps > 0.0)) throw DomainError("layer_norm: eps must be positive");
  if (gain.rows() != 1 || gain.cols() != d) shape_error("layer_norm(gain)", xv, gain.value());
  if (bias.rows() != 1 || bias.cols() != d) shape_error("layer_norm(bias)", xv, bias.value());

  // Normalized rows and inverse std are kept for the backward pass.
  auto xhat = std::make_shared<Tensor2>(xv.rows(), d);
  auto inv_std = std::make_shared<std::vector<double>>(xv.rows());
  Tensor2 out(xv.rows(), d);
  const Tensor2& gv = gain.value();
  const Tensor2& bv = bias.value();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xv(r, c);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xv(r, c) - mean) * (xv(r, c) - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xv(r, c) - mean) * is;
      (*xhat)(r, c) = h;
      out(r, c) = h * gv(0, c) + bv(0, c);
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      std::move(out), {x, gain, bias}, [ix, ig, ib, xhat, inv_std](Tape& t, std::size_t self) {
        const Tensor2& g = t.grad(self);
        const Tensor2& gv = t.value(ig);
        const std::size_t d = g.cols();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double dh = g(r, c) * gv(0, c);
            mean_dh += dh;
            mean_dh_h += dh * (*xhat)(r, c);
            if (t.needs_grad(ig)) t.grad(ig)(0, c) += g(r, c) * (*xhat)(r, c);
            if (t.needs_grad(ib)) t.grad(ib)(0, c) += g(r, c);
          }
          if (!t.needs_grad(ix)) continue;
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          Tensor2& gx = t.grad(ix);
          for (std::size_t c = 0; c < d; ++c) {
            const double dh = g(r, c) * gv(0, c);
            gx(r, c) += (*inv_std)[r] * (dh - mean_dh - (*xhat)(r, c) * mean_dh_h);
          }
        }
      });
}

Var attention(Var q, Var k, Var v) {
  if (k.rows() == 0) throw EmptyEvidenceError("attention: no key/value rows");
  if (q.cols() != k.cols() || q.cols() == 0) shape_error("attention(q,k)", q.value(), k.value());
  if (k.rows() != v.rows()) shape_error("attention(k,v)", k.value(), v.value());
  const double s = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return matmul(softmax_rows(scale(matmul_nt(q, k), s)), v);
}

Var segment_attention(Var q, Var k, Var v, std::span<const Segment> segs) {
  const Tensor2& qv = q.value();
  const Tensor2& kv = k.value();
  const Tensor2& vv = v.value();
  if (qv.cols() != kv.cols() || qv.cols() == 0) shape_error("segment_attention(q,k)", qv, kv);
  if (kv.rows() != vv.rows()) shape_error("segment_attention(k,v)", kv, vv);
  if (segs.size() != qv.rows()) {
    throw DimensionError("segment_attention: " + std::to_string(segs.size()) + " segments for " +
                         std::to_string(qv.rows()) + " queries");
  }
  check_segments(segs, kv.rows(), "segment_attention");

  const auto& kt = detail::kt();
  const double s = 1.0 / std::sqrt(static_cast<double>(qv.cols()));
  const std::size_t d = qv.cols();
  const std::size_t dv = vv.cols();
  // Attention weights, one run per segment; segments may overlap.
  std::vector<std::size_t> offsets(segs.size() + 1, 0);
  for (std::size_t i = 0; i < segs.size(); ++i) offsets[i + 1] = offsets[i] + segs[i].size();
  auto probs = std::make_shared<std::vector<double>>(offsets.back(), 0.0);
  Tensor2 out(qv.rows(), dv);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const Segment sg = segs[i];
    std::span<double> p(probs->data() + offsets[i], sg.size());
    for (std::size_t r = 0; r < sg.size(); ++r) {
      p[r] = s * kt.dot(qv.row_span(i).data(), kv.row_span(sg.begin + r).data(), d);
    }
    softmax_inplace(p);
    for (std::size_t r = 0; r < sg.size(); ++r) {
      kt.axpy(p[r], vv.row_span(sg.begin + r).data(), out.row_span(i).data(), dv);
    }
  }

  std::vector<Segment> segs_copy(segs.begin(), segs.end());
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape().record(
      std::move(out), {q, k, v},
      [iq, ik, iv, s, probs, offsets = std::move(offsets), segs_copy = std::move(segs_copy)](Tape& t,
                                                                                              std::size_t self) {
        const auto& kt = detail::kt();
        const Tensor2& g = t.grad(self);
        const Tensor2& qv = t.value(iq);
        const Tensor2& kv = t.value(ik);
        const Tensor2& vv = t.value(iv);
        const std::size_t d = qv.cols();
        const std::size_t dv = vv.cols();
        std::vector<double> dscore;
        for (std::size_t i = 0; i < segs_copy.size(); ++i) {
          const Segment sg = segs_copy[i];
          const double* p = probs->data() + offsets[i];
          const double* gi = g.row_span(i).data();
          dscore.assign(sg.size(), 0.0);
          double inner = 0.0;
          for (std::size_t r = 0; r < sg.size(); ++r) {
            const double dp = kt.dot(gi, vv.row_span(sg.begin + r).data(), dv);
            dscore[r] = dp;
            inner += p[r] * dp;
            if (t.needs_grad(iv)) kt.axpy(p[r], gi, t.grad(iv).row_span(sg.begin + r).data(), dv);
          }
          for (std::size_t r = 0; r < sg.size(); ++r) {
            const double ds = p[r] * (dscore[r] - inner) * s;
            if (ds == 0.0) continue;
            if (t.needs_grad(iq)) {
              kt.axpy(ds, kv.row_span(sg.begin + r).data(), t.grad(iq).row_span(i).data(), d);
            }
            if (t.needs_grad(ik)) {
              kt.axpy(ds, qv.row_span(i).data(), t.grad(ik).row_span(sg.begin + r).data(), d);
            }
          }
        }
      });
}

Var segment_mean(Var x, std::span<const Segment> segs) {
  const Tensor2& xv = x.value();
  check_segments(segs, xv.rows(), "segment_mean");
  const auto& kt = detail::kt();
  Tensor2 out(segs.size(), xv.cols());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double w = 1.0 / static_cast<double>(segs[i].size());
    for (std::size_t r = segs[i].begin; r < segs[i].end; ++r) {
      kt.axpy(w, xv.row_span(r).data(), out.row_span(i).data(), xv.cols());
    }
  }
  std::vector<Segment> segs_copy(segs.begin(), segs.end());
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [ix, segs_copy = std::move(segs_copy)](Tape& t, std::size_t self) {
                           const auto& kt = detail::kt();
                           const Tensor2& g = t.grad(self);
                           Tensor2& gx = t.grad(ix);
                           for (std::size_t i = 0; i < segs_copy.size(); ++i) {
                             const double w = 1.0 / static_cast<double>(segs_copy[i].size());
                             for (std::size_t r = segs_copy[i].begin; r < segs_copy[i].end; ++r) {
                               kt.axpy(w, g.row_span(i).data(), gx.row_span(r).data(), g.cols());
                             }
                           }
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Tensor2 out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor2& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.row_span(r).begin(), pv.row_span(r).end(),
                out.row_span(r).begin() + static_cast<std::ptrdiff_t>(offsets[k]));
    }
  }
  return parts.front().tape().record(
      std::move(out), parts, [ids, offsets](Tape& t, std::size_t self) {
        const Tensor2& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.needs_grad(ids[k])) continue;
          Tensor2& gp = t.grad(ids[k]);
          for (std::size_t r = 0; r < gp.rows(); ++r) {
            for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offsets[k] + c);
          }
        }
      });
}

Var cosine_similarity(Var a, Var b) {
  const Tensor2& av = a.value();
  const Tensor2& bv = b.value();
  if (av.cols() != bv.cols()) shape_error("cosine_similarity", av, bv);
  const auto& kt = detail::kt();
  auto norms_of = [&kt](const Tensor2& m) {
    std::vector<double> n(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      n[r] = std::sqrt(kt.dot(m.row_span(r).data(), m.row_span(r).data(), m.cols()));
    }
    return n;
  };
  auto na = std::make_shared<std::vector<double>>(norms_of(av));
  auto nb = std::make_shared<std::vector<double>>(norms_of(bv));
  const bool degenerate =
      std::count(na->begin(), na->end(), 0.0) + std::count(nb->begin(), nb->end(), 0.0) > 0;
  if (degenerate) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) warn("cosine similarity over a zero-norm row; scored as 0");
  }
  Tensor2 out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < bv.rows(); ++j) {
      if ((*na)[i] == 0.0 || (*nb)[j] == 0.0) continue;
      out(i, j) = kt.dot(av.row_span(i).data(), bv.row_span(j).data(), av.cols()) /
                  ((*na)[i] * (*nb)[j]);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, na, nb](Tape& t, std::size_t self) {
    const auto& kt = detail::kt();
    const Tensor2& g = t.grad(self);
    const Tensor2& c = t.value(self);
    const Tensor2& av = t.value(ia);
    const Tensor2& bv = t.value(ib);
    const std::size_t d = av.cols();
    // d c_ij / d a_i = (b_j / |b_j| - c_ij a_i / |a_i|) / |a_i|, symmetric for b_j.
    for (std::size_t i = 0; i < av.rows(); ++i) {
      if ((*na)[i] == 0.0) continue;
      for (std::size_t j = 0; j < bv.rows(); ++j) {
        if ((*nb)[j] == 0.0 || g(i, j) == 0.0) continue;
        const double gij = g(i, j);
        if (t.needs_grad(ia)) {
          double* ga = t.grad(ia).row_span(i).data();
          kt.axpy(gij / ((*na)[i] * (*nb)[j]), bv.row_span(j).data(), ga, d);
          kt.axpy(-gij * c(i, j) / ((*na)[i] * (*na)[i]), av.row_span(i).data(), ga, d);
        }
        if (t.needs_grad(ib)) {
          double* gb = t.grad(ib).row_span(j).data();
          kt.axpy(gij / ((*na)[i] * (*nb)[j]), av.row_span(i).data(), gb, d);
          kt.axpy(-gij * c(i, j) / ((*nb)[j] * (*nb)[j]), bv.row_span(j).data(), gb, d);
        }
      }
    }
  });
}

Var weighted_sum(Var x, const Tensor2& weights) {
  const Tensor2& xv = x.value();
  if (!xv.same_shape(weights)) shape_error("weighted_sum", xv, weights);
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += weights.data()[i] * xv.data()[i];
  const std::size_t ix = x.id();
  return x.tape().record(Tensor2(1, 1, total), {x}, [ix, weights](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    auto gx = t.grad(ix).data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * weights.data()[i];
  });
}

Var nll_mean(Var log_probs, std::span<const std::size_t> gold) {
  const Tensor2& lp = log_probs.value();
  if (gold.size() != lp.rows() || lp.rows() == 0) {
    throw DimensionError("nll_mean: " + std::to_string(gold.size()) + " labels for " +
                         lp.shape_string());
  }
  double total = 0.0;
  for (std::size_t r = 0; r < lp.rows(); ++r) {
    if (gold[r] >= lp.cols()) throw DomainError("nll_mean: label out of range");
    total -= lp(r, gold[r]);
  }
  const double inv_n = 1.0 / static_cast<double>(lp.rows());
  std::vector<std::size_t> gold_copy(gold.begin(), gold.end());
  const std::size_t ix = log_probs.id();
  return log_probs.tape().record(
      Tensor2(1, 1, total * inv_n), {log_probs},
      [ix, inv_n, gold_copy = std::move(gold_copy)](Tape& t, std::size_t self) {
        const double g = t.grad(self)(0, 0);
        Tensor2& gx = t.grad(ix);
        for (std::size_t r = 0; r < gold_copy.size(); ++r) gx(r, gold_copy[r]) -= g * inv_n;
      });
}

Var embedding_bag_mean(Var table, const std::vector<std::vector<std::size_t>>& ids) {
  const Tensor2& tv = table.value();
  const auto& kt = detail::kt();
  Tensor2 out(ids.size(), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].empty()) throw DomainError("embedding_bag_mean: empty id list");
    const double w = 1.0 / static_cast<double>(ids[i].size());
    for (std::size_t id : ids[i]) {
      if (id >= tv.rows()) throw DomainError("embedding_bag_mean: id out of range");
      kt.axpy(w, tv.row_span(id).data(), out.row_span(i).data(), tv.cols());
    }
  }
  const std::size_t it = table.id();
  return table.tape().record(std::move(out), {table}, [it, ids](Tape& t, std::size_t self) {
    const auto& kt = detail::kt();
    const Tensor2& g = t.grad(self);
    Tensor2& gt = t.grad(it);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double w = 1.0 / static_cast<double>(ids[i].size());
      for (std::size_t id : ids[i]) kt.axpy(w, g.row_span(i).data(), gt.row_span(id).data(), g.cols());
    }
  });
}

// ---- plain-tensor conveniences ------------------------------------------------

Tensor2 linear(const Tensor2& x, const Tensor2& w, const Tensor2& b) {
  Tape t;
  return linear(t.constant(x), t.constant(w), t.constant(b)).value();
}

Tensor2 relu(const Tensor2& x) {
  Tape t;
  return relu(t.constant(x)).value();
}

Tensor2 softmax_rows(const Tensor2& x) {
  Tape t;
  return softmax_rows(t.constant(x)).value();
}

Tensor2 layer_norm(const Tensor2& x, const Tensor2& gain, const Tensor2& bias, double eps) {
  Tape t;
  return layer_norm(t.constant(x), t.constant(gain), t.constant(bias), eps).value();
}

Tensor2 attention(const Tensor2& q, const Tensor2& k, const Tensor2& v) {
  Tape t;
  return attention(t.constant(q), t.constant(k), t.constant(v)).value();
}

}  // namespace komei
