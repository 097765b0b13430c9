// Copyright 2026 The kpirl Authors
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

#include "kpirl/tensor.h"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace kpirl {

Tensor::Tensor(int rank, int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), rank_(static_cast<int8_t>(rank)), values_(std::move(values)) {
  CheckFinite();
}

void Tensor::CheckFinite() const {
  const int64_t n = static_cast<int64_t>(rank_ == 2 ? rows_ * cols_ : rows_);
  if (n != size()) {
    throw std::invalid_argument("tensor: shape " + ShapeString() + " does not match " +
                                std::to_string(size()) + " values");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw std::domain_error("tensor: non-finite value rejected");
    }
  }
}

Tensor Tensor::Scalar(double v) { return Tensor(1, 1, 0, {v}); }

Tensor Tensor::Vector(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor(1, n, 0, std::move(values));
}

Tensor Tensor::Matrix(int rows, int cols, std::vector<double> values) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("tensor: negative matrix dimension");
  }
  return Tensor(2, rows, cols, std::move(values));
}

Tensor Tensor::Zeros(int n) { return Tensor(1, n, 0, std::vector<double>(n, 0.0)); }

Tensor Tensor::ZerosLike(const Tensor& other) {
  return Tensor(other.rank_, other.rows_, other.cols_,
                std::vector<double>(other.values_.size(), 0.0));
}

Tensor Tensor::Ones(int n) { return Tensor(1, n, 0, std::vector<double>(n, 1.0)); }

Tensor Tensor::Full(int n, double v) { return Tensor(1, n, 0, std::vector<double>(n, v)); }

std::vector<int> Tensor::shape() const {
  if (rank_ == 2) return {rows_, cols_};
  return {rows_};
}

std::string Tensor::ShapeString() const {
  if (rank_ == 2) {
    return "[" + std::to_string(rows_) + "," + std::to_string(cols_) + "]";
  }
  return "[" + std::to_string(rows_) + "]";
}

}  // namespace kpirl
