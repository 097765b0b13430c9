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

#ifndef KPIRL_CORE_PLANNER_H_
#define KPIRL_CORE_PLANNER_H_

#include <span>
#include <vector>

#include "kpirl/costs.h"
#include "kpirl/dynamics.h"
#include "kpirl/graph.h"
#include "kpirl/sim_env.h"

namespace kpirl {

struct PlannerOptions {
  double alpha = 0.01;       // action learning rate
  int iters = 50;            // gradient steps on the action sequence
  double coord_scale = 1.0;  // applied to keypoints and goal before the cost
  bool backtracking = false;  // halve alpha whenever the cost increases
};

// The recorded inner optimization: iters gradient-descent updates of the
// action sequence, all on one tape, so that an enclosing Gradient() call can
// differentiate the result with respect to the cost parameters.
struct PlanTrace {
  NodeId u_final;                 // [H*dof] optimized actions
  std::vector<NodeId> frames_xy;  // final-rollout keypoints, scaled, per frame [2K]
  std::vector<StateNodes> frames;  // final-rollout raw state nodes (pixels)
  std::vector<double> cost_history;
};

// Extracts the (x, y) pixel channels of a flattened keypoint node.
NodeId KeypointXyNode(Graph& g, NodeId kp_flat, int num_keypoints);

PlanTrace RecordActionOptimization(Graph& g, const DynamicsModel& model,
                                   std::span<const NodeId> model_params, const SystemState& s0,
                                   const CostFunction& cost, NodeId psi,
                                   const std::vector<double>& goal_xy, int horizon,
                                   const PlannerOptions& opts,
                                   const std::vector<double>* u_init = nullptr);

struct PlanResult {
  std::vector<std::array<double, kArmDof>> actions;
  Trajectory predicted;
  std::vector<double> cost_history;
  double relative_distance = 0.0;
};

// Value-level planning with a frozen cost.
PlanResult OptimizeActions(const DynamicsModel& model, const SystemState& s0,
                           const CostFunction& cost, const std::vector<double>& goal_xy,
                           int horizon, const PlannerOptions& opts,
                           const std::vector<double>* u_init = nullptr);

// Componentwise clamp to the per-step displacement limit.
std::vector<std::array<double, kArmDof>> ClampActions(
    const std::vector<std::array<double, kArmDof>>& actions, double step_limit);

// Open-loop execution of the sequence through the simulator.
Trajectory ExecutePlan(const SceneConfig& scene, const SystemState& s0,
                       const std::vector<std::array<double, kArmDof>>& actions);

// Re-plans after every executed step (receding horizon). Only families whose
// parameters do not index absolute time are supported.
Trajectory ExecuteRecedingHorizon(const SceneConfig& scene, const DynamicsModel& model,
                                  const SystemState& s0, const CostFunction& cost,
                                  const std::vector<double>& goal_xy, int horizon,
                                  const PlannerOptions& opts);

// ||z_T - goal|| / ||z_0 - goal|| over the x,y channels; dims, when given,
// selects a subset of the interleaved (x,y) layout.
double RelativeDistance(const Trajectory& traj, const std::vector<double>& goal_xy,
                        const std::vector<int>* dims = nullptr);

// Mean over keypoints of the squared pixel distance to the goal at the final
// frame.
double GoalMse(const SystemState& final_state, const std::vector<double>& goal_xy);

}  // namespace kpirl

#endif  // KPIRL_CORE_PLANNER_H_
