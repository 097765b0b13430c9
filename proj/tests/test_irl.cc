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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "kpirl/costs.h"
#include "kpirl/dynamics.h"
#include "kpirl/grad_check.h"
#include "kpirl/irl.h"
#include "kpirl/planner.h"
#include "kpirl/rng.h"
#include "kpirl/sim_env.h"
#include "testing_util.h"

namespace kpirl {
namespace {

using testing::ToyDemo;
using testing::ToyLinearDynamics;
using testing::ToyState;

TEST(Features, PinnedCases) {
  EXPECT_EQ(Features({1.0, 2.0}, {1.0, 2.0}), (std::vector<double>{0.0, 0.0}));
  // K=1, deviation (1,2) -> (1,4).
  EXPECT_EQ(Features({1.0, 2.0}, {0.0, 0.0}), (std::vector<double>{1.0, 4.0}));
}

TEST(Features, WeightedCostIsPsiDotStackedFeatures) {
  Rng rng(31);
  const int k = 3, frames = 5;
  std::vector<double> psi(k * 2), goal(k * 2);
  for (double& v : psi) v = rng.Uniform(0.0, 2.0);
  for (double& v : goal) v = rng.Uniform(-3.0, 3.0);
  std::vector<std::vector<double>> traj(frames, std::vector<double>(k * 2));
  for (auto& f : traj) {
    for (double& v : f) v = rng.Uniform(-3.0, 3.0);
  }
  const CostFunction cost = CostFunction::Weighted(k, psi);
  double expected = 0.0;
  for (const auto& f : traj) {
    const std::vector<double> phi = Features(f, goal);
    for (int i = 0; i < k * 2; ++i) expected += psi[i] * phi[i];
  }
  EXPECT_LE(RelativeError(cost.Evaluate(traj, goal), expected), 1e-12);
}

TEST(FeatureExpectation, PinnedCases) {
  // gamma = 1, single frame: mu = phi(z_0).
  const std::vector<std::vector<double>> single = {{2.0, 1.0}};
  EXPECT_EQ(FeatureExpectation(single, {0.0, 0.0}, 1.0), (std::vector<double>{4.0, 1.0}));

  // Trajectory at the goal throughout: mu = 0.
  const std::vector<std::vector<double>> at_goal(4, {1.5, -2.5});
  for (double v : FeatureExpectation(at_goal, {1.5, -2.5}, 0.8)) EXPECT_EQ(v, 0.0);

  // gamma = 0.5, three frames, hand sum.
  const std::vector<std::vector<double>> frames = {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  const std::vector<double> mu = FeatureExpectation(frames, {0.0, 0.0}, 0.5);
  EXPECT_DOUBLE_EQ(mu[0], 1.0 + 0.5 * 4.0 + 0.25 * 9.0);
  EXPECT_DOUBLE_EQ(mu[1], 0.0);

  EXPECT_THROW(FeatureExpectation(frames, {0.0, 0.0}, 0.0), std::invalid_argument);
  EXPECT_THROW(FeatureExpectation(frames, {0.0, 0.0}, 1.5), std::invalid_argument);
}

IrlConfig SmallConfig(CostFamily family, int epochs) {
  IrlConfig cfg;
  cfg.family = family;
  cfg.epochs = epochs;
  cfg.alpha = 0.05;
  cfg.eta = 0.01;
  cfg.iters_max = 3;
  cfg.eval_every = 0;
  return cfg;
}

TEST(TrainIrl, StationaryDemoIsAFixedPoint) {
  // Demo equal to the zero-action rollout: the inner loop is already
  // optimal, the outer gradient vanishes, psi stays put.
  ToyLinearDynamics model(1, Tensor::Matrix(3, 3, {0.5, 0, 0, 0, 0.5, 0, 0, 0, 0}));
  const Demonstration demo = ToyDemo(1, {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  const IrlConfig cfg = SmallConfig(CostFamily::kWeighted, 3);
  const IrlResult result = TrainIrl(cfg, model, {demo}, {});
  for (const auto& psi : result.record.psi_history) {
    for (double v : psi) EXPECT_NEAR(v, 1.0, 1e-8);
  }
  for (double loss : result.record.train_loss) EXPECT_EQ(loss, 0.0);
}

TEST(TrainIrl, OuterGradientMatchesFiniteDifferences) {
  Rng rng(77);
  const Tensor b = Tensor::Matrix(3, 3, {0.7, 0.1, 0, 0.2, 0.5, 0, 0, 0, 0});
  ToyLinearDynamics model(1, b);
  const Demonstration demo =
      ToyDemo(1, {{0.0, 0.0}, {0.4, 0.1}, {0.7, 0.3}, {1.0, 0.5}});  // horizon 3

  CostFunction cost = CostFunction::Weighted(1);
  std::vector<double> psi0 = {0.8, 1.3};
  cost.set_params(psi0);

  const BilevelEval eval = BilevelLossAndGradient(model, demo, cost, 0.05, 2, 1.0);
  auto loss_of = [&](const std::vector<double>& psi) {
    CostFunction c = cost;
    c.set_params(psi);
    return BilevelLossAndGradient(model, demo, c, 0.05, 2, 1.0).loss;
  };
  const std::vector<double> fd = NumericalGradient(loss_of, psi0, 1e-6);
  for (size_t i = 0; i < fd.size(); ++i) {
    EXPECT_LT(RelativeError(eval.psi_grad[i], fd[i]), 1e-4) << "component " << i;
  }
}

TEST(TrainIrl, PsiScaleCouplesLinearlyIntoTheFirstInnerStep) {
  // Doubling psi doubles grad_u C exactly, hence doubles the first recorded
  // action update bit for bit.
  ToyLinearDynamics model(1, Tensor::Matrix(3, 3, {0.6, 0, 0, 0, 0.4, 0, 0, 0, 0}));
  const SystemState s0 = ToyState(1, {0.2, -0.3});
  const std::vector<double> goal = {1.0, 0.7};
  PlannerOptions opts;
  opts.alpha = 0.05;
  opts.iters = 1;

  auto one_step = [&](const std::vector<double>& psi) {
    CostFunction cost = CostFunction::Weighted(1, psi);
    Graph g;
    const std::vector<NodeId> params = model.BindParams(g);
    const NodeId psi_node = cost.MakeParamsNode(g, false);
    const PlanTrace trace =
        RecordActionOptimization(g, model, params, s0, cost, psi_node, goal, 2, opts);
    return g.value(trace.u_final).values();
  };
  const std::vector<double> u1 = one_step({0.9, 1.4});
  const std::vector<double> u2 = one_step({1.8, 2.8});
  ASSERT_EQ(u1.size(), u2.size());
  for (size_t i = 0; i < u1.size(); ++i) {
    EXPECT_DOUBLE_EQ(u2[i], 2.0 * u1[i]);
  }
}

TEST(TrainIrl, KnownModelReachingLossDecreases) {
  SceneConfig scene;
  TaskSpec task;
  task.start_theta = {0.370321, 1.986553, -1.556966};
  task.dx = 0.25;
  task.horizon_steps = 12;
  const Demonstration demo = GenerateDemo(scene, task);
  GroundTruthDynamics model(scene);

  IrlConfig cfg;
  cfg.family = CostFamily::kWeighted;
  cfg.epochs = 40;
  cfg.eta = 0.001;
  cfg.alpha = 0.01;
  cfg.iters_max = 5;
  cfg.coord_scale = 1.0 / scene.camera.frame_px;
  cfg.eval_every = 0;
  const IrlResult result = TrainIrl(cfg, model, {demo}, {});
  EXPECT_LT(result.record.train_loss.back(), 0.7 * result.record.train_loss.front());
  // Nonnegativity is enforced on every epoch's parameters.
  for (const auto& psi : result.record.psi_history) {
    for (double v : psi) EXPECT_GE(v, 0.0);
  }
}

TEST(TrainIrl, DeterministicRecord) {
  ToyLinearDynamics model(1, Tensor::Matrix(3, 3, {0.7, 0.1, 0, 0.2, 0.5, 0, 0, 0, 0}));
  const Demonstration demo = ToyDemo(1, {{0.0, 0.0}, {0.3, 0.2}, {0.8, 0.4}});
  const Demonstration test = ToyDemo(1, {{0.1, 0.0}, {0.4, 0.2}, {0.9, 0.4}});
  IrlConfig cfg = SmallConfig(CostFamily::kRbf, 6);
  cfg.rbf_kernels = 2;
  cfg.eval_every = 2;
  cfg.eval_iters = 4;
  const IrlResult a = TrainIrl(cfg, model, {demo}, {test});
  const IrlResult b = TrainIrl(cfg, model, {demo}, {test});
  EXPECT_EQ(a.record.train_loss, b.record.train_loss);
  EXPECT_EQ(a.record.psi_history, b.record.psi_history);
  EXPECT_EQ(a.record.eval_epochs, b.record.eval_epochs);
  EXPECT_EQ(a.record.test_rd_mean, b.record.test_rd_mean);
  EXPECT_EQ(a.cost.params(), b.cost.params());
}

TEST(TrainIrl, MismatchedHorizonsRejected) {
  ToyLinearDynamics model(1, Tensor::Matrix(3, 3, {0.5, 0, 0, 0, 0.5, 0, 0, 0, 0}));
  const Demonstration d1 = ToyDemo(1, {{0.0, 0.0}, {0.5, 0.0}});
  const Demonstration d2 = ToyDemo(1, {{0.0, 0.0}, {0.3, 0.0}, {0.6, 0.0}});
  EXPECT_THROW(TrainIrl(SmallConfig(CostFamily::kWeighted, 2), model, {d1, d2}, {}),
               std::invalid_argument);
}

TEST(Apprenticeship, ImmediateTerminationWhenExpertMatched) {
  // Demo identical to the zero-action rollout: mu(0) = mu_E, margin 0.
  ToyLinearDynamics model(1, Tensor::Matrix(3, 3, {0.5, 0, 0, 0, 0.5, 0, 0, 0, 0}));
  const Demonstration demo = ToyDemo(1, {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  IrlConfig cfg = SmallConfig(CostFamily::kWeighted, 10);
  const BaselineResult result = ApprenticeshipTrain(cfg, model, demo, {});
  EXPECT_EQ(result.status, "margin-converged");
  EXPECT_TRUE(result.record.train_loss.empty());
}

TEST(Apprenticeship, FirstPsiIsUnitNormMaximizer) {
  // Geometry arranged so that mu_E - mu(0) has the 3-4-5 structure; the
  // first weight vector must be the unit-norm direction.
  ToyLinearDynamics model(1, Tensor::Matrix(3, 3, {0.5, 0, 0, 0, 0.5, 0, 0, 0, 0}));
  const double gx = std::sqrt(3.0), gy = 2.0;
  // Demo: start at origin, jump to the goal. gamma = 1, horizon 1.
  const Demonstration demo = ToyDemo(1, {{0.0, 0.0}, {gx, gy}});
  IrlConfig cfg = SmallConfig(CostFamily::kWeighted, 3);
  cfg.gamma = 1.0;
  const BaselineResult result = ApprenticeshipTrain(cfg, model, demo, {});
  ASSERT_FALSE(result.psi_history.empty());

  // mu_E = phi(start) + phi(goal) = (3,4) + 0; mu(0) = 2 phi(start) = (6,8).
  // Direction (-3,-4) normalizes to (-0.6,-0.8).
  EXPECT_NEAR(result.psi_history[0][0], -0.6, 1e-12);
  EXPECT_NEAR(result.psi_history[0][1], -0.8, 1e-12);
  const double norm = std::hypot(result.psi_history[0][0], result.psi_history[0][1]);
  EXPECT_NEAR(norm, 1.0, 1e-12);
}

TEST(Apprenticeship, StalledWhenPolicyCannotMove) {
  // A zero-response model: every rollout equals the initial one, so the
  // projection has nothing to project onto.
  ToyLinearDynamics model(1, Tensor::Matrix(3, 3, std::vector<double>(9, 0.0)));
  const Demonstration demo = ToyDemo(1, {{0.0, 0.0}, {1.0, 1.0}});
  IrlConfig cfg = SmallConfig(CostFamily::kWeighted, 5);
  const BaselineResult result = ApprenticeshipTrain(cfg, model, demo, {});
  EXPECT_EQ(result.status, "stalled");
}

TEST(EvaluateCost, UnitWeightsReachingBeatsHalfDistance) {
  SceneConfig scene;
  GroundTruthDynamics model(scene);
  std::vector<Demonstration> tests;
  for (int i = 0; i < 3; ++i) {
    TaskSpec task;
    task.start_theta = {0.370321 + 0.02 * i, 1.986553, -1.556966};
    task.dx = 0.24 + 0.02 * i;
    task.horizon_steps = 24;
    tests.push_back(GenerateDemo(scene, task));
  }
  PlannerOptions opts;
  opts.alpha = 0.001;
  opts.iters = 50;
  opts.coord_scale = 1.0 / scene.camera.frame_px;
  const auto rows = EvaluateCost(CostFunction::Weighted(4), model, scene, tests, opts);
  ASSERT_EQ(rows.size(), 3u);
  for (const DemoEval& row : rows) {
    EXPECT_LT(row.rd_all, 0.5);
    EXPECT_LT(row.rd_x, 0.6);
    EXPECT_GE(row.goal_mse, 0.0);
    EXPECT_TRUE(std::isfinite(row.goal_mse));
  }
}

TEST(MovingXDims, BackgroundExcluded) {
  EXPECT_EQ(MovingXDims(4), (std::vector<int>{0, 2, 4}));
  EXPECT_EQ(MovingXDims(1), (std::vector<int>{0}));
}

}  // namespace
}  // namespace kpirl
