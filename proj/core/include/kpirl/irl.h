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

#ifndef KPIRL_CORE_IRL_H_
#define KPIRL_CORE_IRL_H_

#include <string>
#include <vector>

#include "kpirl/costs.h"
#include "kpirl/dynamics.h"
#include "kpirl/planner.h"
#include "kpirl/sim_env.h"

namespace kpirl {

struct IrlConfig {
  double eta = 0.001;   // outer rate on cost parameters
  double alpha = 0.01;  // inner rate on actions
  int iters_max = 10;   // inner gradient steps per epoch
  int epochs = 300;
  CostFamily family = CostFamily::kWeighted;
  int rbf_kernels = 5;
  double gamma = 0.9;  // feature-expectation discount (baseline)
  double coord_scale = 1.0;
  int eval_every = 1;  // test evaluation cadence; 0 disables
  double eval_alpha = 0.001;
  int eval_iters = 50;
  uint64_t seed = 0;
};

// Per-epoch training history. Loss and parameter snapshots cover every
// epoch; test metrics exist for the epochs listed in eval_epochs.
struct IrlRecord {
  std::vector<double> train_loss;
  std::vector<std::vector<double>> psi_history;
  std::vector<int> eval_epochs;
  std::vector<double> test_rd_mean;
  std::vector<double> test_rd_std;
};

// Task loss of the final rollout differentiated through the unrolled inner
// action optimization (the outer gradient of the bilevel problem).
struct BilevelEval {
  double loss = 0.0;
  std::vector<double> psi_grad;
};
BilevelEval BilevelLossAndGradient(const DynamicsModel& model, const Demonstration& demo,
                                   const CostFunction& cost, double alpha, int iters,
                                   double coord_scale);

struct IrlResult {
  CostFunction cost;
  IrlRecord record;
};

// Gradient-based bilevel cost learning: per epoch the inner loop re-plans
// from zero actions under the current cost, the demo loss of the final
// rollout is differentiated through that trace, and the parameters take a
// projected (nonnegative) step against the mean gradient over demos.
IrlResult TrainIrl(const IrlConfig& config, const DynamicsModel& model,
                   const std::vector<Demonstration>& train_demos,
                   const std::vector<Demonstration>& test_demos);

// Per-step task features: squared deviations from the goal, per keypoint and
// pixel axis.
std::vector<double> Features(const std::vector<double>& z_xy, const std::vector<double>& goal_xy);

// Discounted feature sum over the frames of a trajectory.
std::vector<double> FeatureExpectation(const std::vector<std::vector<double>>& frames_xy,
                                       const std::vector<double>& goal_xy, double gamma);

// Feature-expectation matching with the projection update and unit-norm
// weights. The margin is the distance from the expert expectation to the
// running projection; training stops when it drops to margin_threshold.
struct BaselineResult {
  std::vector<double> psi;  // final unit-norm weight vector
  std::vector<std::vector<double>> psi_history;
  IrlRecord record;  // train_loss holds the per-epoch margin
  std::string status;  // "margin-converged" | "epoch-budget" | "stalled"
};
BaselineResult ApprenticeshipTrain(const IrlConfig& config, const DynamicsModel& model,
                                   const Demonstration& demo,
                                   const std::vector<Demonstration>& test_demos,
                                   double margin_threshold = 1.0);

// Plans on each test demo with a frozen cost and reports the metrics of
// §-style evaluation: relative distance over all x,y dims, over the x dims
// of the moving keypoints, and the executed-goal MSE in pixels.
struct DemoEval {
  double rd_all = 0.0;
  double rd_x = 0.0;
  double goal_mse = 0.0;
};
std::vector<DemoEval> EvaluateCost(const CostFunction& cost, const DynamicsModel& plan_model,
                                   const SceneConfig& exec_scene,
                                   const std::vector<Demonstration>& test_demos,
                                   const PlannerOptions& eval_opts);

// x-dimension indices of the moving keypoints (the background keypoint is
// last by convention).
std::vector<int> MovingXDims(int num_keypoints);

}  // namespace kpirl

#endif  // KPIRL_CORE_IRL_H_
