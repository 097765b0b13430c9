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

#include "kpirl/irl.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace kpirl {

namespace {

std::vector<std::vector<double>> ScaledDemoXy(const Demonstration& demo, double scale) {
  std::vector<std::vector<double>> out;
  out.reserve(demo.frames.size());
  for (const SystemState& s : demo.frames) {
    std::vector<double> xy = KeypointsXy(s);
    for (double& v : xy) v *= scale;
    out.push_back(std::move(xy));
  }
  return out;
}

void CheckDemoSet(const std::vector<Demonstration>& demos) {
  if (demos.empty()) throw std::invalid_argument("irl: no demonstrations");
  const size_t frames = demos.front().frames.size();
  const size_t k = demos.front().frames.front().keypoints.size();
  for (const Demonstration& d : demos) {
    if (d.frames.size() != frames) {
      throw std::invalid_argument("irl: demonstrations have mismatched horizons");
    }
    for (const SystemState& s : d.frames) {
      if (s.keypoints.size() != k) {
        throw std::invalid_argument("irl: demonstrations have mismatched keypoint counts");
      }
    }
  }
}

CostFunction MakeCost(const IrlConfig& config, int frames, int num_keypoints) {
  switch (config.family) {
    case CostFamily::kWeighted:
      return CostFunction::Weighted(num_keypoints);
    case CostFamily::kTimeDep:
      return CostFunction::TimeDep(frames, num_keypoints);
    case CostFamily::kRbf:
      return CostFunction::Rbf(frames, num_keypoints, config.rbf_kernels);
    case CostFamily::kDefault:
      throw std::invalid_argument("irl: the default cost has no learnable parameters");
  }
  throw std::logic_error("irl: unknown family");
}

}  // namespace

BilevelEval BilevelLossAndGradient(const DynamicsModel& model, const Demonstration& demo,
                                   const CostFunction& cost, double alpha, int iters,
                                   double coord_scale) {
  Graph g;
  const std::vector<NodeId> params = model.BindParams(g);
  const NodeId psi = cost.MakeParamsNode(g, /*as_variable=*/true);
  PlannerOptions opts;
  opts.alpha = alpha;
  opts.iters = iters;
  opts.coord_scale = coord_scale;
  const PlanTrace trace =
      RecordActionOptimization(g, model, params, demo.frames.front(), cost, psi,
                               GoalKeypointsXy(demo), demo.horizon(), opts);
  const NodeId loss = IrlLossNode(g, trace.frames_xy, ScaledDemoXy(demo, coord_scale));
  const std::vector<NodeId> grad = g.Gradient(loss, {&psi, 1});
  BilevelEval out;
  out.loss = g.scalar(loss);
  out.psi_grad = g.value(grad[0]).values();
  return out;
}

IrlResult TrainIrl(const IrlConfig& config, const DynamicsModel& model,
                   const std::vector<Demonstration>& train_demos,
                   const std::vector<Demonstration>& test_demos) {
  if (config.eta <= 0.0 || config.alpha <= 0.0) {
    throw std::invalid_argument("irl: learning rates must be positive");
  }
  if (config.epochs < 1) throw std::invalid_argument("irl: epochs must be >= 1");
  CheckDemoSet(train_demos);
  const int frames = static_cast<int>(train_demos.front().frames.size());
  const int k = static_cast<int>(train_demos.front().frames.front().keypoints.size());

  IrlResult result{MakeCost(config, frames, k), {}};
  CostFunction& cost = result.cost;
  IrlRecord& record = result.record;

  PlannerOptions eval_opts;
  eval_opts.alpha = config.eval_alpha;
  eval_opts.iters = config.eval_iters;
  eval_opts.coord_scale = config.coord_scale;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<double> mean_grad(cost.params().size(), 0.0);
    double mean_loss = 0.0;
    for (const Demonstration& demo : train_demos) {
      BilevelEval eval;
      try {
        eval = BilevelLossAndGradient(model, demo, cost, config.alpha, config.iters_max,
                                      config.coord_scale);
      } catch (const std::exception& e) {
        throw std::runtime_error("irl: epoch " + std::to_string(epoch) + ": " + e.what());
      }
      mean_loss += eval.loss;
      for (size_t i = 0; i < mean_grad.size(); ++i) mean_grad[i] += eval.psi_grad[i];
    }
    const double n = static_cast<double>(train_demos.size());
    mean_loss /= n;
    for (double& v : mean_grad) v /= n;
    for (double v : mean_grad) {
      if (!std::isfinite(v)) {
        throw std::runtime_error("irl: non-finite outer gradient at epoch " +
                                 std::to_string(epoch));
      }
    }

    std::vector<double> psi = cost.params();
    for (size_t i = 0; i < psi.size(); ++i) psi[i] -= config.eta * mean_grad[i];
    ClampNonNegative(psi);
    cost.set_params(psi);

    record.train_loss.push_back(mean_loss);
    record.psi_history.push_back(cost.params());

    const bool last = epoch + 1 == config.epochs;
    if (!test_demos.empty() && config.eval_every > 0 &&
        (epoch % config.eval_every == 0 || last)) {
      std::vector<double> rds;
      rds.reserve(test_demos.size());
      for (const Demonstration& demo : test_demos) {
        const PlanResult plan =
            OptimizeActions(model, demo.frames.front(), cost, GoalKeypointsXy(demo),
                            demo.horizon(), eval_opts);
        rds.push_back(plan.relative_distance);
      }
      double mean = std::accumulate(rds.begin(), rds.end(), 0.0) / rds.size();
      double var = 0.0;
      for (double r : rds) var += (r - mean) * (r - mean);
      record.eval_epochs.push_back(epoch);
      record.test_rd_mean.push_back(mean);
      record.test_rd_std.push_back(std::sqrt(var / rds.size()));
    }
  }
  return result;
}

std::vector<double> Features(const std::vector<double>& z_xy,
                             const std::vector<double>& goal_xy) {
  if (z_xy.size() != goal_xy.size()) {
    throw std::invalid_argument("features: dimension mismatch");
  }
  std::vector<double> phi(z_xy.size());
  for (size_t i = 0; i < z_xy.size(); ++i) {
    phi[i] = (z_xy[i] - goal_xy[i]) * (z_xy[i] - goal_xy[i]);
  }
  return phi;
}

std::vector<double> FeatureExpectation(const std::vector<std::vector<double>>& frames_xy,
                                       const std::vector<double>& goal_xy, double gamma) {
  if (gamma <= 0.0 || gamma > 1.0) {
    throw std::invalid_argument("feature expectation: gamma must lie in (0, 1]");
  }
  if (frames_xy.empty()) throw std::invalid_argument("feature expectation: empty trajectory");
  std::vector<double> mu(goal_xy.size(), 0.0);
  double discount = 1.0;
  for (const auto& frame : frames_xy) {
    const std::vector<double> phi = Features(frame, goal_xy);
    for (size_t i = 0; i < mu.size(); ++i) mu[i] += discount * phi[i];
    discount *= gamma;
  }
  return mu;
}

namespace {

double Norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

BaselineResult ApprenticeshipTrain(const IrlConfig& config, const DynamicsModel& model,
                                   const Demonstration& demo,
                                   const std::vector<Demonstration>& test_demos,
                                   double margin_threshold) {
  CheckDemoSet({demo});
  const int k = static_cast<int>(demo.frames.front().keypoints.size());
  const int horizon = demo.horizon();
  const std::vector<double> goal = GoalKeypointsXy(demo);
  std::vector<double> goal_scaled = goal;
  for (double& v : goal_scaled) v *= config.coord_scale;

  const std::vector<double> mu_expert =
      FeatureExpectation(ScaledDemoXy(demo, config.coord_scale), goal_scaled, config.gamma);

  PlannerOptions inner_opts;
  inner_opts.alpha = config.alpha;
  inner_opts.iters = config.iters_max;
  inner_opts.coord_scale = config.coord_scale;

  PlannerOptions eval_opts;
  eval_opts.alpha = config.eval_alpha;
  eval_opts.iters = config.eval_iters;
  eval_opts.coord_scale = config.coord_scale;

  auto rollout_mu = [&](const CostFunction& cost) {
    const PlanResult plan =
        OptimizeActions(model, demo.frames.front(), cost, goal, horizon, inner_opts);
    std::vector<std::vector<double>> frames;
    frames.reserve(plan.predicted.frames.size());
    for (const SystemState& s : plan.predicted.frames) {
      std::vector<double> xy = KeypointsXy(s);
      for (double& v : xy) v *= config.coord_scale;
      frames.push_back(std::move(xy));
    }
    return FeatureExpectation(frames, goal_scaled, config.gamma);
  };

  BaselineResult result;
  // mu(0): features of the initial (zero-action) policy rollout.
  const Trajectory init_rollout = RolloutWithModel(
      model, demo.frames.front(),
      std::vector<std::array<double, kArmDof>>(horizon, {0.0, 0.0, 0.0}));
  std::vector<std::vector<double>> init_frames;
  for (const SystemState& s : init_rollout.frames) {
    std::vector<double> xy = KeypointsXy(s);
    for (double& v : xy) v *= config.coord_scale;
    init_frames.push_back(std::move(xy));
  }
  std::vector<double> mu_bar = FeatureExpectation(init_frames, goal_scaled, config.gamma);

  std::vector<double> direction(mu_expert.size());
  for (size_t i = 0; i < direction.size(); ++i) direction[i] = mu_expert[i] - mu_bar[i];
  double margin = Norm(direction);
  result.status = "epoch-budget";

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (margin <= margin_threshold) {
      result.status = "margin-converged";
      break;
    }
    // Unit-norm maximizer of the max-min margin over the collected mus.
    std::vector<double> psi = direction;
    for (double& v : psi) v /= margin;
    result.psi = psi;
    result.psi_history.push_back(psi);
    result.record.train_loss.push_back(margin);
    result.record.psi_history.push_back(psi);

    CostFunction cost = CostFunction::Weighted(k, psi);
    const std::vector<double> mu_new = rollout_mu(cost);

    if (!test_demos.empty() && config.eval_every > 0) {
      if (epoch % config.eval_every == 0 || epoch + 1 == config.epochs) {
        std::vector<double> rds;
        for (const Demonstration& test : test_demos) {
          const PlanResult plan = OptimizeActions(model, test.frames.front(), cost,
                                                  GoalKeypointsXy(test), test.horizon(),
                                                  eval_opts);
          rds.push_back(plan.relative_distance);
        }
        double mean = std::accumulate(rds.begin(), rds.end(), 0.0) / rds.size();
        double var = 0.0;
        for (double r : rds) var += (r - mean) * (r - mean);
        result.record.eval_epochs.push_back(epoch);
        result.record.test_rd_mean.push_back(mean);
        result.record.test_rd_std.push_back(std::sqrt(var / rds.size()));
      }
    }

    // Projection step toward the expert expectation.
    std::vector<double> d(mu_new.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = mu_new[i] - mu_bar[i];
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < d.size(); ++i) {
      num += d[i] * (mu_expert[i] - mu_bar[i]);
      den += d[i] * d[i];
    }
    if (den < 1e-18) {
      result.status = "stalled";
      break;
    }
    const double lambda = std::clamp(num / den, 0.0, 1.0);
    for (size_t i = 0; i < mu_bar.size(); ++i) mu_bar[i] += lambda * d[i];
    for (size_t i = 0; i < direction.size(); ++i) direction[i] = mu_expert[i] - mu_bar[i];
    margin = Norm(direction);
  }
  if (result.psi.empty()) {
    // Converged before the first epoch; keep the normalized direction if it
    // exists, otherwise a zero vector.
    result.psi.assign(mu_expert.size(), 0.0);
    if (margin > 0.0) {
      for (size_t i = 0; i < result.psi.size(); ++i) result.psi[i] = direction[i] / margin;
    }
  }
  return result;
}

std::vector<int> MovingXDims(int num_keypoints) {
  std::vector<int> dims;
  for (int k = 0; k + 1 < num_keypoints; ++k) dims.push_back(2 * k);
  if (dims.empty()) dims.push_back(0);
  return dims;
}

std::vector<DemoEval> EvaluateCost(const CostFunction& cost, const DynamicsModel& plan_model,
                                   const SceneConfig& exec_scene,
                                   const std::vector<Demonstration>& test_demos,
                                   const PlannerOptions& eval_opts) {
  std::vector<DemoEval> out;
  out.reserve(test_demos.size());
  const std::vector<int> x_dims = MovingXDims(plan_model.num_keypoints());
  for (const Demonstration& demo : test_demos) {
    const std::vector<double> goal = GoalKeypointsXy(demo);
    const PlanResult plan = OptimizeActions(plan_model, demo.frames.front(), cost, goal,
                                            demo.horizon(), eval_opts);
    DemoEval row;
    row.rd_all = plan.relative_distance;
    row.rd_x = RelativeDistance(plan.predicted, goal, &x_dims);
    const Trajectory executed = ExecutePlan(
        exec_scene, demo.frames.front(), ClampActions(plan.actions, exec_scene.arm.step_limit));
    row.goal_mse = GoalMse(executed.frames.back(), goal);
    out.push_back(row);
  }
  return out;
}

}  // namespace kpirl
