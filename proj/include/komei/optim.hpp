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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "komei/autograd.hpp"

namespace komei {

struct AdamWConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t warmup_steps = 0;  // 0: no warmup
  std::size_t total_steps = 0;   // 0: no decay after warmup
};

/// Learning-rate multiplier at 1-based step t: linear ramp to 1 over the
/// warmup, then linear decay reaching 0 at total_steps.
double lr_multiplier(const AdamWConfig& cfg, std::size_t t);

/// Moments for each parameter, in the order the parameter list was given.
struct OptimState {
  explicit OptimState(std::span<const ParamPtr> params, AdamWConfig cfg = {});

  AdamWConfig cfg;
  std::vector<Tensor2> m;
  std::vector<Tensor2> v;
  std::size_t t = 0;
};

/// One decoupled-weight-decay Adam step over params (same list and order as
/// the state was built from). Frozen parameters are left untouched.
void adamw_step(std::span<const ParamPtr> params, OptimState& state);

void zero_grads(std::span<const ParamPtr> params);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Builds the scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares analytic gradients against central differences
/// (f(x + h) - f(x - h)) / 2h for every coordinate of every trainable param.
/// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
/// Throws DomainError when the loss is not finite.
GradCheckResult grad_check(const LossBuilder& loss, std::span<const ParamPtr> params, double h);

}  // namespace komei
