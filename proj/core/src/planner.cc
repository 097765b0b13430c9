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

#include "kpirl/planner.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kpirl {

NodeId KeypointXyNode(Graph& g, NodeId kp_flat, int num_keypoints) {
  std::vector<NodeId> parts;
  parts.reserve(num_keypoints);
  for (int k = 0; k < num_keypoints; ++k) {
    parts.push_back(g.Slice(kp_flat, k * 3, k * 3 + 2));
  }
  return g.Concat(parts);
}

PlanTrace RecordActionOptimization(Graph& g, const DynamicsModel& model,
                                   std::span<const NodeId> model_params, const SystemState& s0,
                                   const CostFunction& cost, NodeId psi,
                                   const std::vector<double>& goal_xy, int horizon,
                                   const PlannerOptions& opts,
                                   const std::vector<double>* u_init) {
  if (opts.iters < 1) throw std::invalid_argument("planner: iters must be >= 1");
  if (opts.alpha <= 0.0) throw std::invalid_argument("planner: alpha must be positive");
  if (horizon < 1) throw std::invalid_argument("planner: horizon must be >= 1");
  const int k = model.num_keypoints();
  const int u_dim = horizon * kArmDof;
  if (u_init && static_cast<int>(u_init->size()) != u_dim) {
    throw std::invalid_argument("planner: u_init has wrong length");
  }

  const StateNodes start = MakeStateNodes(g, s0);
  std::vector<double> goal_scaled = goal_xy;
  for (double& v : goal_scaled) v *= opts.coord_scale;
  const NodeId goal_node = g.Constant(Tensor::Vector(goal_scaled));

  auto rollout_frames = [&](NodeId u_flat, std::vector<StateNodes>* raw) {
    std::vector<NodeId> u_steps;
    u_steps.reserve(horizon);
    for (int t = 0; t < horizon; ++t) {
      u_steps.push_back(g.Slice(u_flat, t * kArmDof, (t + 1) * kArmDof));
    }
    const RolloutNodes ro = RecordRollout(g, model, model_params, start, u_steps);
    std::vector<NodeId> frames_xy;
    frames_xy.reserve(ro.frames.size());
    for (const StateNodes& s : ro.frames) {
      NodeId xy = KeypointXyNode(g, s.keypoints, k);
      if (opts.coord_scale != 1.0) xy = g.Scale(xy, opts.coord_scale);
      frames_xy.push_back(xy);
    }
    if (raw) *raw = ro.frames;
    return frames_xy;
  };

  NodeId u_cur =
      g.Variable(u_init ? Tensor::Vector(*u_init) : Tensor::Zeros(u_dim));
  PlanTrace trace;
  double alpha = opts.alpha;
  for (int it = 0; it < opts.iters; ++it) {
    try {
      const std::vector<NodeId> frames_xy = rollout_frames(u_cur, nullptr);
      const NodeId c = cost.Build(g, frames_xy, goal_node, psi);
      if (opts.backtracking && !trace.cost_history.empty() &&
          g.scalar(c) > trace.cost_history.back()) {
        alpha *= 0.5;
      }
      trace.cost_history.push_back(g.scalar(c));
      const std::vector<NodeId> du = g.Gradient(c, {&u_cur, 1});
      u_cur = g.Sub(u_cur, g.Scale(du[0], alpha));
    } catch (const std::domain_error& e) {
      throw std::runtime_error("planner: non-finite value at iteration " + std::to_string(it) +
                               ": " + e.what());
    }
  }
  trace.u_final = u_cur;
  trace.frames_xy = rollout_frames(u_cur, &trace.frames);
  return trace;
}

namespace {

SystemState StateFromNodes(const Graph& g, const StateNodes& n) {
  SystemState s;
  const Tensor& z = g.value(n.keypoints);
  for (int j = 0; j < kArmDof; ++j) {
    s.theta[j] = g.value(n.theta)[j];
    s.thetadot[j] = g.value(n.thetadot)[j];
  }
  const int k = static_cast<int>(z.size()) / 3;
  s.keypoints.resize(k);
  for (int i = 0; i < k; ++i) s.keypoints[i] = Keypoint{z[i * 3], z[i * 3 + 1], z[i * 3 + 2]};
  return s;
}

}  // namespace

PlanResult OptimizeActions(const DynamicsModel& model, const SystemState& s0,
                           const CostFunction& cost, const std::vector<double>& goal_xy,
                           int horizon, const PlannerOptions& opts,
                           const std::vector<double>* u_init) {
  if (opts.iters < 1) throw std::invalid_argument("planner: iters must be >= 1");
  if (opts.alpha <= 0.0) throw std::invalid_argument("planner: alpha must be positive");
  if (horizon < 1) throw std::invalid_argument("planner: horizon must be >= 1");
  const int k = model.num_keypoints();
  const int u_dim = horizon * kArmDof;
  if (u_init && static_cast<int>(u_init->size()) != u_dim) {
    throw std::invalid_argument("planner: u_init has wrong length");
  }

  std::vector<double> goal_scaled = goal_xy;
  for (double& v : goal_scaled) v *= opts.coord_scale;

  // One gradient step per graph; arithmetic is identical to the single-tape
  // trace in RecordActionOptimization, only the tape is discarded between
  // iterations.
  std::vector<double> u = u_init ? *u_init : std::vector<double>(u_dim, 0.0);
  PlanResult result;
  double alpha = opts.alpha;
  auto step_once = [&](bool update, std::vector<StateNodes>* raw, Graph& g) {
    const std::vector<NodeId> params = model.BindParams(g);
    const NodeId psi = cost.MakeParamsNode(g, /*as_variable=*/false);
    const StateNodes start = MakeStateNodes(g, s0);
    NodeId u_node = g.Variable(Tensor::Vector(u));
    std::vector<NodeId> u_steps;
    for (int t = 0; t < horizon; ++t) {
      u_steps.push_back(g.Slice(u_node, t * kArmDof, (t + 1) * kArmDof));
    }
    const RolloutNodes ro = RecordRollout(g, model, params, start, u_steps);
    std::vector<NodeId> frames_xy;
    for (const StateNodes& s : ro.frames) {
      NodeId xy = KeypointXyNode(g, s.keypoints, k);
      if (opts.coord_scale != 1.0) xy = g.Scale(xy, opts.coord_scale);
      frames_xy.push_back(xy);
    }
    const NodeId c = cost.Build(g, frames_xy, g.Constant(Tensor::Vector(goal_scaled)),
                                psi);
    if (update) {
      if (opts.backtracking && !result.cost_history.empty() &&
          g.scalar(c) > result.cost_history.back()) {
        alpha *= 0.5;
      }
      result.cost_history.push_back(g.scalar(c));
      const std::vector<NodeId> du = g.Gradient(c, {&u_node, 1});
      const Tensor& grad = g.value(du[0]);
      NodeId u_next = g.Sub(u_node, g.Scale(du[0], alpha));
      (void)grad;
      u = g.value(u_next).values();
    }
    if (raw) *raw = ro.frames;
  };

  for (int it = 0; it < opts.iters; ++it) {
    Graph g;
    try {
      step_once(/*update=*/true, nullptr, g);
    } catch (const std::domain_error& e) {
      throw std::runtime_error("planner: non-finite value at iteration " + std::to_string(it) +
                               ": " + e.what());
    }
  }

  Graph g;
  std::vector<StateNodes> raw;
  step_once(/*update=*/false, &raw, g);
  result.actions.resize(horizon);
  for (int t = 0; t < horizon; ++t) {
    for (int j = 0; j < kArmDof; ++j) result.actions[t][j] = u[t * kArmDof + j];
  }
  result.predicted.frames.reserve(raw.size());
  for (const StateNodes& n : raw) result.predicted.frames.push_back(StateFromNodes(g, n));
  result.relative_distance = RelativeDistance(result.predicted, goal_xy);
  return result;
}

std::vector<std::array<double, kArmDof>> ClampActions(
    const std::vector<std::array<double, kArmDof>>& actions, double step_limit) {
  std::vector<std::array<double, kArmDof>> out = actions;
  for (auto& u : out) {
    for (double& v : u) v = std::clamp(v, -step_limit, step_limit);
  }
  return out;
}

Trajectory ExecutePlan(const SceneConfig& scene, const SystemState& s0,
                       const std::vector<std::array<double, kArmDof>>& actions) {
  Trajectory traj;
  traj.frames.push_back(s0);
  SystemState cur = s0;
  for (const auto& u : actions) {
    cur = Step(scene, cur, u);
    traj.frames.push_back(cur);
  }
  return traj;
}

Trajectory ExecuteRecedingHorizon(const SceneConfig& scene, const DynamicsModel& model,
                                  const SystemState& s0, const CostFunction& cost,
                                  const std::vector<double>& goal_xy, int horizon,
                                  const PlannerOptions& opts) {
  if (cost.family() == CostFamily::kTimeDep || cost.family() == CostFamily::kRbf) {
    throw std::invalid_argument(
        "receding horizon: time-indexed cost families replan against absolute time; "
        "use the open-loop planner");
  }
  Trajectory traj;
  traj.frames.push_back(s0);
  SystemState cur = s0;
  for (int t = 0; t < horizon; ++t) {
    const PlanResult plan = OptimizeActions(model, cur, cost, goal_xy, horizon - t, opts);
    const auto clamped = ClampActions(plan.actions, scene.arm.step_limit);
    cur = Step(scene, cur, clamped.front());
    traj.frames.push_back(cur);
  }
  return traj;
}

double RelativeDistance(const Trajectory& traj, const std::vector<double>& goal_xy,
                        const std::vector<int>* dims) {
  if (traj.frames.size() < 2) throw std::invalid_argument("relative distance: empty trajectory");
  const std::vector<double> first = KeypointsXy(traj.frames.front());
  const std::vector<double> last = KeypointsXy(traj.frames.back());
  if (first.size() != goal_xy.size()) {
    throw std::invalid_argument("relative distance: goal dimension mismatch");
  }
  auto norm = [&](const std::vector<double>& z) {
    double acc = 0.0;
    if (dims) {
      for (int d : *dims) acc += (z[d] - goal_xy[d]) * (z[d] - goal_xy[d]);
    } else {
      for (size_t d = 0; d < z.size(); ++d) acc += (z[d] - goal_xy[d]) * (z[d] - goal_xy[d]);
    }
    return std::sqrt(acc);
  };
  const double denom = norm(first);
  if (denom <= 0.0) {
    throw std::invalid_argument("relative distance: start already at goal");
  }
  return norm(last) / denom;
}

double GoalMse(const SystemState& final_state, const std::vector<double>& goal_xy) {
  const std::vector<double> z = KeypointsXy(final_state);
  if (z.size() != goal_xy.size()) {
    throw std::invalid_argument("goal mse: dimension mismatch");
  }
  const size_t k = z.size() / 2;
  double acc = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const double dx = z[2 * i] - goal_xy[2 * i];
    const double dy = z[2 * i + 1] - goal_xy[2 * i + 1];
    acc += dx * dx + dy * dy;
  }
  return acc / static_cast<double>(k);
}

}  // namespace kpirl
