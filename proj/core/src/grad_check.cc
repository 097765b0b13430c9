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

#include "kpirl/grad_check.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kpirl {

double RelativeError(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

double EvaluateScalarFn(const ScalarFn& f, const Tensor& x) {
  Graph g;
  NodeId out = f(g, g.Variable(x));
  if (!g.value(out).is_scalar()) {
    throw std::invalid_argument("scalar function returned non-scalar node");
  }
  return g.scalar(out);
}

std::vector<double> AutodiffGradient(const ScalarFn& f, const Tensor& x) {
  Graph g;
  NodeId var = g.Variable(x);
  NodeId out = f(g, var);
  std::vector<NodeId> grads = g.Gradient(out, {&var, 1});
  return g.value(grads[0]).values();
}

std::vector<double> NumericalGradient(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& x, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("finite differences need epsilon > 0");
  std::vector<double> grad(x.size(), 0.0);
  std::vector<double> probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + epsilon;
    const double hi = f(probe);
    probe[i] = x[i] - epsilon;
    const double lo = f(probe);
    probe[i] = x[i];
    grad[i] = (hi - lo) / (2.0 * epsilon);
  }
  return grad;
}

double FiniteDifferenceCheck(const ScalarFn& f, const Tensor& x, double epsilon) {
  const std::vector<double> ad = AutodiffGradient(f, x);
  auto eval = [&](const std::vector<double>& v) {
    Tensor probe =
        x.rank() == 2 ? Tensor::Matrix(x.rows(), x.cols(), v) : Tensor::Vector(v);
    return EvaluateScalarFn(f, probe);
  };
  const std::vector<double> fd = NumericalGradient(eval, x.values(), epsilon);
  double worst = 0.0;
  for (size_t i = 0; i < ad.size(); ++i) {
    worst = std::max(worst, RelativeError(ad[i], fd[i]));
  }
  return worst;
}

}  // namespace kpirl
