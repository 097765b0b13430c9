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

#ifndef KPIRL_CORE_COSTS_H_
#define KPIRL_CORE_COSTS_H_

#include <span>
#include <string>
#include <vector>

#include "kpirl/graph.h"
#include "kpirl/sim_env.h"

namespace kpirl {

enum class CostFamily { kWeighted, kTimeDep, kRbf, kDefault };

const char* CostFamilyName(CostFamily family);
CostFamily CostFamilyFromName(const std::string& name);

// Goal cost over predicted keypoint trajectories. The trajectory enters as
// per-frame vectors of (x, y) per keypoint, frame 0 included; parameters
// weight the squared deviations from the goal.
//
// Parameter layouts (interleaved x, y per keypoint):
//   weighted:  [K*2]
//   time-dep:  [T*K*2], frame-major
//   rbf:       [J*K*2], kernel-major; fixed kernels kappa_j(t) = exp(b (t - mu_j)^2)
//              with centers uniformly spaced over [1, T] and t = frame + 1.
class CostFunction {
 public:
  static CostFunction Weighted(int num_keypoints, std::vector<double> psi = {});
  static CostFunction TimeDep(int frames, int num_keypoints, std::vector<double> psi = {});
  // bandwidth <= 0 picks the default overlap: neighboring kernels cross at 0.5.
  static CostFunction Rbf(int frames, int num_keypoints, int num_kernels,
                          std::vector<double> weights = {}, double bandwidth = 0.0);
  static CostFunction Default(int num_keypoints);

  CostFamily family() const { return family_; }
  int num_keypoints() const { return k_; }
  int frames() const { return frames_; }
  int num_kernels() const { return kernels_; }
  double bandwidth() const { return bandwidth_; }
  const std::vector<double>& centers() const { return centers_; }

  bool has_params() const { return family_ != CostFamily::kDefault; }
  const std::vector<double>& params() const { return params_; }
  void set_params(std::vector<double> params);

  // Value of kernel j at (1-based, possibly fractional) time index t.
  double Kernel(int j, double t) const;

  // Records the parameter vector on a graph, as a variable (for learning)
  // or a constant (for planning with a frozen cost).
  NodeId MakeParamsNode(Graph& g, bool as_variable) const;

  // Records the cost of the trajectory against the goal. psi must come from
  // MakeParamsNode (ignored for the default family).
  NodeId Build(Graph& g, std::span<const NodeId> frames_xy, NodeId goal_xy,
               NodeId psi = NodeId{}) const;

  // Value-level evaluation on a scratch graph.
  double Evaluate(const std::vector<std::vector<double>>& frames_xy,
                  const std::vector<double>& goal_xy) const;

 private:
  CostFunction() = default;

  CostFamily family_ = CostFamily::kDefault;
  int k_ = 0;
  int frames_ = 0;
  int kernels_ = 0;
  double bandwidth_ = 0.0;
  std::vector<double> centers_;
  std::vector<double> params_;
};

// Squared distance between demonstrated and predicted keypoints, summed over
// frames and x,y channels.
NodeId IrlLossNode(Graph& g, std::span<const NodeId> predicted_xy,
                   const std::vector<std::vector<double>>& demo_xy);
double IrlLoss(const std::vector<std::vector<double>>& demo_xy,
               const std::vector<std::vector<double>>& predicted_xy);

// Demo keypoints re-expressed relative to the first frame, and back.
Demonstration RelativizeDemo(const Demonstration& demo);
Demonstration RebaseDemo(const Demonstration& relative_demo,
                         const std::vector<Keypoint>& initial_keypoints);

// Projects cost parameters onto the nonnegative orthant (outer IRL updates).
void ClampNonNegative(std::vector<double>& values);

}  // namespace kpirl

#endif  // KPIRL_CORE_COSTS_H_
