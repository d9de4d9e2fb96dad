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


#include <atomic>
#include <cstdlib>
#include <string>

#include "komei/error.hpp"
#include "komei/kernels.hpp"
#include "komei/util.hpp"

namespace komei::kernels {

#if KOMEI_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace avx2
#endif

#if KOMEI_HAVE_NEON
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace neon
#endif

namespace {

constexpr Table kScalar{&scalar::dot, &scalar::axpy, &scalar::sum};
#if KOMEI_HAVE_AVX2
constexpr Table kAvx2{&avx2::dot, &avx2::axpy, &avx2::sum};
#endif
#if KOMEI_HAVE_NEON
constexpr Table kNeon{&neon::dot, &neon::axpy, &neon::sum};
#endif

Backend detect() {
  Backend best = Backend::scalar;
  if (backend_supported(Backend::avx2)) best = Backend::avx2;
  if (backend_supported(Backend::neon)) best = Backend::neon;

  if (const char* env = std::getenv("KOMEI_KERNELS")) {
    const std::string want(env);
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
      if (want == backend_name(b)) {
        if (backend_supported(b)) return b;
        warn("KOMEI_KERNELS=" + want + " not supported on this CPU; using " +
             std::string(backend_name(best)));
        return best;
      }
    }
    warn("unknown KOMEI_KERNELS value '" + want + "'");
  }
  return best;
}

std::atomic<Backend>& active() {
  static std::atomic<Backend> b{detect()};
  return b;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

bool backend_supported(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2:
#if KOMEI_HAVE_AVX2
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if KOMEI_HAVE_NEON
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() noexcept { return active().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw ConfigError("kernel backend '" + std::string(backend_name(b)) +
                      "' is not available on this machine");
  }
  active().store(b, std::memory_order_relaxed);
}

const Table& table_for(Backend b) {
  switch (b) {
#if KOMEI_HAVE_AVX2
    case Backend::avx2: return kAvx2;
#endif
#if KOMEI_HAVE_NEON
    case Backend::neon: return kNeon;
#endif
    default: return kScalar;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  return table_for(active_backend()).dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
  table_for(active_backend()).axpy(alpha, x.data(), y.data(), x.size());
}

double sum(std::span<const double> x) {
  return table_for(active_backend()).sum(x.data(), x.size());
}

}  // namespace komei::kernels
