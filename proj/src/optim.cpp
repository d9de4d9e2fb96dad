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


#include "komei/optim.hpp"

#include <algorithm>
#include <cmath>

#include "komei/error.hpp"

namespace komei {

double lr_multiplier(const AdamWConfig& cfg, std::size_t t) {
  if (cfg.warmup_steps > 0 && t < cfg.warmup_steps) {
    return static_cast<double>(t) / static_cast<double>(cfg.warmup_steps);
  }
  if (cfg.total_steps > cfg.warmup_steps) {
    const double remaining = static_cast<double>(cfg.total_steps) - static_cast<double>(t);
    return std::max(0.0, remaining / static_cast<double>(cfg.total_steps - cfg.warmup_steps));
  }
  return 1.0;
}

OptimState::OptimState(std::span<const ParamPtr> params, AdamWConfig cfg_) : cfg(cfg_) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p->value.rows(), p->value.cols());
    v.emplace_back(p->value.rows(), p->value.cols());
  }
}

void adamw_step(std::span<const ParamPtr> params, OptimState& state) {
  if (params.size() != state.m.size()) {
    throw DimensionError("adamw_step: parameter list does not match optimizer state");
  }
  state.t += 1;
  const AdamWConfig& c = state.cfg;
  const double lr = c.lr * lr_multiplier(c, state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.trainable) continue;
    if (!state.m[k].same_shape(p.value)) {
      throw DimensionError("adamw_step: moment shape mismatch for " + p.name);
    }
    auto theta = p.value.data();
    const auto g = p.grad.data();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    const double decay = p.decay ? c.weight_decay : 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= lr * (mhat / (std::sqrt(vhat) + c.eps) + decay * theta[i]);
    }
  }
}

void zero_grads(std::span<const ParamPtr> params) {
  for (const auto& p : params) p->zero_grad();
}

namespace {

double eval_loss(const LossBuilder& loss) {
  Tape tape;
  const Var l = loss(tape);
  if (l.rows() != 1 || l.cols() != 1) throw DimensionError("grad_check: loss must be 1x1");
  const double v = l.value()(0, 0);
  if (!std::isfinite(v)) throw DomainError("grad_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss, std::span<const ParamPtr> params, double h) {
  if (!(h > 0.0)) throw DomainError("grad_check: step must be positive");
  zero_grads(params);
  {
    Tape tape;
    const Var l = loss(tape);
    if (!std::isfinite(l.value()(0, 0))) throw DomainError("grad_check: non-finite loss");
    tape.backward(l);
  }

  GradCheckResult result;
  for (const auto& p : params) {
    if (!p->trainable) continue;
    auto theta = p->value.data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + h;
      const double up = eval_loss(loss);
      theta[i] = saved - h;
      const double down = eval_loss(loss);
      theta[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.coordinates;
      if (result.worst_param.empty() || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p->name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace komei
