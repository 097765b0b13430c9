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

#ifndef KPIRL_CORE_GRAD_CHECK_H_
#define KPIRL_CORE_GRAD_CHECK_H_

#include <functional>

#include "kpirl/graph.h"
#include "kpirl/tensor.h"

namespace kpirl {

// A function that records a scalar expression of one variable on a graph.
using ScalarFn = std::function<NodeId(Graph&, NodeId)>;

// Relative error with floor: |a - b| / max(|a|, |b|, 1e-8).
double RelativeError(double a, double b);

// Compares the reverse-mode gradient of f at x against central finite
// differences with step epsilon. Returns the maximum componentwise relative
// error.
double FiniteDifferenceCheck(const ScalarFn& f, const Tensor& x, double epsilon);

// Evaluates f at x on a fresh graph.
double EvaluateScalarFn(const ScalarFn& f, const Tensor& x);

// Reverse-mode gradient of f at x, as plain numbers.
std::vector<double> AutodiffGradient(const ScalarFn& f, const Tensor& x);

// Central finite-difference gradient of an arbitrary scalar map.
std::vector<double> NumericalGradient(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& x, double epsilon);

}  // namespace kpirl

#endif  // KPIRL_CORE_GRAD_CHECK_H_
