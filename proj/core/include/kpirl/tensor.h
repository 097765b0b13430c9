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

#ifndef KPIRL_CORE_TENSOR_H_
#define KPIRL_CORE_TENSOR_H_

#include <cstdint>
#include <string>
#include <vector>

namespace kpirl {

// Dense tensor of 64-bit reals, rank 1 or 2, row-major. Scalars are
// represented as rank-1 tensors of length 1. Construction rejects NaN/Inf.
class Tensor {
 public:
  Tensor() = default;

  static Tensor Scalar(double v);
  static Tensor Vector(std::vector<double> values);
  static Tensor Matrix(int rows, int cols, std::vector<double> values);
  static Tensor Zeros(int n);
  static Tensor ZerosLike(const Tensor& other);
  static Tensor Ones(int n);
  static Tensor Full(int n, double v);

  int rank() const { return rank_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  // Total number of elements.
  int64_t size() const { return static_cast<int64_t>(values_.size()); }
  bool is_scalar() const { return values_.size() == 1; }

  std::vector<int> shape() const;
  bool same_shape(const Tensor& other) const {
    return rank_ == other.rank_ && rows_ == other.rows_ && cols_ == other.cols_;
  }

  double operator[](int64_t i) const { return values_[i]; }
  double& operator[](int64_t i) { return values_[i]; }
  double at(int r, int c) const { return values_[static_cast<int64_t>(r) * cols_ + c]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  // First element; the value of a scalar tensor.
  double scalar() const { return values_[0]; }

  std::string ShapeString() const;

 private:
  Tensor(int rank, int rows, int cols, std::vector<double> values);
  void CheckFinite() const;

  int32_t rows_ = 0;
  int32_t cols_ = 0;
  int8_t rank_ = 0;
  std::vector<double> values_;
};

}  // namespace kpirl

#endif  // KPIRL_CORE_TENSOR_H_
