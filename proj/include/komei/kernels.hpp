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

// Data-parallel inner loops used by every dense op. Each kernel has a scalar
// reference implementation plus SIMD variants; the active variant is chosen
// once at startup from CPU features and may be overridden with the
// KOMEI_KERNELS environment variable (scalar | avx2 | neon) or set_backend().
//
// Variants agree to rounding, not bitwise: reductions are reassociated across
// lanes. Results are bitwise reproducible for a fixed backend.

#include <cstddef>
#include <span>
#include <string_view>

namespace komei::kernels {

enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend b) noexcept;

/// True when the variant was compiled in and the CPU can run it.
bool backend_supported(Backend b) noexcept;

Backend active_backend() noexcept;

/// Throws ConfigError for an unsupported backend.
void set_backend(Backend b);

/// Sum of a[i] * b[i]. Spans must have equal length.
double dot(std::span<const double> a, std::span<const double> b);

/// y[i] += alpha * x[i]. Spans must have equal length.
void axpy(double alpha, std::span<const double> x, std::span<double> y);

double sum(std::span<const double> x);

// Raw entry points per backend, exposed for equivalence tests.
struct Table {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
};

const Table& table_for(Backend b);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace scalar

}  // namespace komei::kernels
