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

// Accumulating GEMM variants over the active kernel table. C must already
// have the result shape; results are added into it.

#include "komei/kernels.hpp"
#include "komei/tensor.hpp"

namespace komei::detail {

inline const kernels::Table& kt() { return kernels::table_for(kernels::active_backend()); }

// C[m x n] += A[m x k] * B[k x n]
inline void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const auto& k = kt();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row_span(i).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      if (aip != 0.0) k.axpy(aip, b.row_span(p).data(), ci, n);
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
inline void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const auto& k = kt();
  const std::size_t depth = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row_span(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      c(i, j) += k.dot(ai, b.row_span(j).data(), depth);
    }
  }
}

// C[m x n] += A[k x m]^T * B[k x n]
inline void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  const auto& k = kt();
  const std::size_t n = b.cols();
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double* bp = b.row_span(p).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double api = a(p, i);
      if (api != 0.0) k.axpy(api, bp, c.row_span(i).data(), n);
    }
  }
}

}  // namespace komei::detail
