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


#include "komei/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "komei/error.hpp"

namespace komei {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw DomainError("Tensor2: non-finite fill value");
}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Tensor2: " + std::to_string(data_.size()) +
                         " values do not fill " + shape_string());
  }
  check_finite("Tensor2");
}

Tensor2 Tensor2::row(std::initializer_list<double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values));
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Tensor2::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor2::check_finite(const char* context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw DomainError(std::string(context) + ": non-finite value");
  }
}

std::string Tensor2::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

Tensor2 slice_rows(const Tensor2& t, std::size_t first, std::size_t count) {
  if (first + count > t.rows()) throw DimensionError("slice_rows: out of range");
  Tensor2 out(count, t.cols());
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(first * t.cols()), count * t.cols(),
              out.data().begin());
  return out;
}

Tensor2 vstack(std::span<const Tensor2> parts) {
  std::size_t rows = 0;
  const std::size_t cols = parts.empty() ? 0 : parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("vstack: column mismatch " + p.shape_string());
    rows += p.rows();
  }
  Tensor2 out(rows, cols);
  auto it = out.data().begin();
  for (const auto& p : parts) it = std::copy(p.data().begin(), p.data().end(), it);
  return out;
}

Tensor2 random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor2 out(rows, cols);
  for (double& v : out.data()) v = dist(rng);
  return out;
}

}  // namespace komei
