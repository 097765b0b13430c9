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
#include "kpirl/grad_check.h"
#include "kpirl/graph.h"
#include "kpirl/rng.h"

namespace kpirl {
namespace {

using Frames = std::vector<std::vector<double>>;

Frames RandomFrames(int t, int dims, Rng& rng, double lo = -5.0, double hi = 5.0) {
  Frames frames(t, std::vector<double>(dims));
  for (auto& f : frames) {
    for (double& v : f) v = rng.Uniform(lo, hi);
  }
  return frames;
}

TEST(WeightedCost, HandCase) {
  // K=1, T=2, psi=(2,3), deviations x:(1,1), y:(2,0) -> 2*2 + 3*4 = 16.
  CostFunction cost = CostFunction::Weighted(1, {2.0, 3.0});
  const std::vector<double> goal = {0.0, 0.0};
  const Frames frames = {{1.0, 2.0}, {1.0, 0.0}};
  EXPECT_DOUBLE_EQ(cost.Evaluate(frames, goal), 16.0);
}

TEST(WeightedCost, ZeroPsiAndAtGoal) {
  CostFunction zero = CostFunction::Weighted(2, {0.0, 0.0, 0.0, 0.0});
  Rng rng(3);
  const Frames frames = RandomFrames(4, 4, rng);
  EXPECT_DOUBLE_EQ(zero.Evaluate(frames, {1.0, 2.0, 3.0, 4.0}), 0.0);

  CostFunction cost = CostFunction::Weighted(2, {1.5, 2.5, 0.5, 1.0});
  const std::vector<double> goal = {3.0, -1.0, 2.0, 0.5};
  const Frames at_goal(5, goal);
  EXPECT_DOUBLE_EQ(cost.Evaluate(at_goal, goal), 0.0);
}

TEST(TimeDepCost, UniformWeightsReduceToScaledDefault) {
  const int t = 3, k = 2;
  const double c = 1.7;
  CostFunction timedep = CostFunction::TimeDep(t, k, std::vector<double>(t * k * 2, c));
  CostFunction def = CostFunction::Default(k);
  Rng rng(4);
  const Frames frames = RandomFrames(t, k * 2, rng);
  const std::vector<double> goal = {0.3, -0.4, 1.0, 2.0};
  EXPECT_NEAR(timedep.Evaluate(frames, goal), c * def.Evaluate(frames, goal), 1e-9);
}

TEST(TimeDepCost, FinalFrameOnlyWeights) {
  const int t = 4, k = 1;
  std::vector<double> psi(t * k * 2, 0.0);
  psi[(t - 1) * 2] = 1.0;
  psi[(t - 1) * 2 + 1] = 1.0;
  CostFunction cost = CostFunction::TimeDep(t, k, psi);
  Frames frames = {{9.0, 9.0}, {-7.0, 3.0}, {2.0, 2.0}, {1.0, 2.0}};
  const std::vector<double> goal = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(cost.Evaluate(frames, goal), 1.0 + 4.0);
  // Changing earlier frames does not change the cost.
  frames[0] = {100.0, -100.0};
  EXPECT_DOUBLE_EQ(cost.Evaluate(frames, goal), 5.0);
}

TEST(TimeDepCost, HandCase) {
  // K=1, T=2: psi = (1,2, 3,4); deviations frame0 (1,1), frame1 (2,-1).
  CostFunction cost = CostFunction::TimeDep(2, 1, {1.0, 2.0, 3.0, 4.0});
  const Frames frames = {{1.0, 1.0}, {2.0, -1.0}};
  const std::vector<double> goal = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(cost.Evaluate(frames, goal), 1.0 * 1 + 2.0 * 1 + 3.0 * 4 + 4.0 * 1);
}

TEST(RbfCost, KernelIsOneAtOwnCenter) {
  CostFunction cost = CostFunction::Rbf(25, 4, 5);
  for (int j = 0; j < cost.num_kernels(); ++j) {
    EXPECT_DOUBLE_EQ(cost.Kernel(j, cost.centers()[j]), 1.0);
  }
  // Neighboring kernels cross at one half with the default bandwidth.
  const double mid = 0.5 * (cost.centers()[0] + cost.centers()[1]);
  EXPECT_NEAR(cost.Kernel(0, mid), 0.5, 1e-12);
  EXPECT_NEAR(cost.Kernel(1, mid), 0.5, 1e-12);
}

TEST(RbfCost, ZeroWeightsGiveZero) {
  CostFunction cost = CostFunction::Rbf(6, 2, 3, std::vector<double>(3 * 2 * 2, 0.0));
  Rng rng(5);
  EXPECT_DOUBLE_EQ(cost.Evaluate(RandomFrames(6, 4, rng), {0, 0, 0, 0}), 0.0);
}

TEST(RbfCost, HandCaseMatchesManualEvaluation) {
  // J=1, K=1, T=3, b=-0.1, center at (1+3)/2 = 2.
  const double b = -0.1;
  CostFunction cost = CostFunction::Rbf(3, 1, 1, {2.0, 3.0}, b);
  const Frames frames = {{1.0, 0.5}, {-1.0, 2.0}, {0.25, -0.5}};
  const std::vector<double> goal = {0.0, 0.0};
  double expected = 0.0;
  for (int t = 0; t < 3; ++t) {
    const double kappa = std::exp(b * ((t + 1.0) - 2.0) * ((t + 1.0) - 2.0));
    expected += kappa * (2.0 * frames[t][0] * frames[t][0] + 3.0 * frames[t][1] * frames[t][1]);
  }
  EXPECT_NEAR(cost.Evaluate(frames, goal), expected, 1e-12);
}

TEST(RbfCost, RejectsTooManyKernels) {
  EXPECT_THROW(CostFunction::Rbf(5, 2, 5), std::invalid_argument);
  EXPECT_THROW(CostFunction::Rbf(5, 2, 9), std::invalid_argument);
  EXPECT_NO_THROW(CostFunction::Rbf(5, 2, 4));
}

TEST(DefaultCost, HandCases) {
  CostFunction cost = CostFunction::Default(1);
  EXPECT_DOUBLE_EQ(cost.Evaluate({{3.0, 4.0}}, {0.0, 0.0}), 25.0);

  // Equals the weighted cost with unit weights.
  Rng rng(6);
  const Frames frames = RandomFrames(5, 8, rng);
  std::vector<double> goal(8);
  for (double& v : goal) v = rng.Uniform(-2.0, 2.0);
  CostFunction def = CostFunction::Default(4);
  CostFunction ones = CostFunction::Weighted(4);
  EXPECT_NEAR(def.Evaluate(frames, goal), ones.Evaluate(frames, goal), 1e-9);
}

TEST(IrlLoss, ZeroAndHandCase) {
  const Frames demo = {{1.0, 2.0}, {3.0, 4.0}};
  EXPECT_DOUBLE_EQ(IrlLoss(demo, demo), 0.0);
  // Single frame single keypoint deviation (1,2) -> 5.
  EXPECT_DOUBLE_EQ(IrlLoss({{0.0, 0.0}}, {{1.0, 2.0}}), 5.0);
}

TEST(IrlLoss, KeypointPermutationInvariant) {
  Rng rng(8);
  const int t = 4, k = 3;
  const Frames demo = RandomFrames(t, k * 2, rng);
  const Frames pred = RandomFrames(t, k * 2, rng);
  // Permute keypoints 0<->2 in both arguments.
  auto permute = [&](const Frames& in) {
    Frames out = in;
    for (auto& f : out) {
      std::swap(f[0], f[4]);
      std::swap(f[1], f[5]);
    }
    return out;
  };
  EXPECT_NEAR(IrlLoss(demo, pred), IrlLoss(permute(demo), permute(pred)), 1e-12);
}

TEST(IrlLoss, HorizonMismatchRejected) {
  const Frames demo = {{0.0, 0.0}, {1.0, 1.0}};
  const Frames pred = {{0.0, 0.0}};
  EXPECT_THROW(IrlLoss(demo, pred), std::invalid_argument);
}

std::vector<CostFunction> AllFamilies(int frames, int k, Rng& rng) {
  auto randvec = [&](int n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.Uniform(0.0, 3.0);
    return v;
  };
  std::vector<CostFunction> out;
  out.push_back(CostFunction::Weighted(k, randvec(k * 2)));
  out.push_back(CostFunction::TimeDep(frames, k, randvec(frames * k * 2)));
  out.push_back(CostFunction::Rbf(frames, k, 3, randvec(3 * k * 2)));
  return out;
}

TEST(CostProperties, LinearInParameters) {
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const int frames = rng.UniformInt(4, 8);
    const int k = rng.UniformInt(1, 3);
    const Frames traj = RandomFrames(frames, k * 2, rng);
    std::vector<double> goal(k * 2);
    for (double& v : goal) v = rng.Uniform(-3.0, 3.0);
    const double a = rng.Uniform(0.0, 2.0);
    const double b = rng.Uniform(0.0, 2.0);
    for (CostFunction cost : AllFamilies(frames, k, rng)) {
      std::vector<double> p1(cost.params().size()), p2(cost.params().size());
      for (double& v : p1) v = rng.Uniform(0.0, 2.0);
      for (double& v : p2) v = rng.Uniform(0.0, 2.0);
      CostFunction c1 = cost, c2 = cost, combo = cost;
      c1.set_params(p1);
      c2.set_params(p2);
      std::vector<double> pc(p1.size());
      for (size_t i = 0; i < p1.size(); ++i) pc[i] = a * p1[i] + b * p2[i];
      combo.set_params(pc);
      const double lhs = combo.Evaluate(traj, goal);
      const double rhs = a * c1.Evaluate(traj, goal) + b * c2.Evaluate(traj, goal);
      EXPECT_LE(RelativeError(lhs, rhs), 1e-12);
    }
  }
}

TEST(CostProperties, NonnegativeAndZeroAtGoal) {
  Rng rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    const int frames = rng.UniformInt(4, 7);
    const int k = rng.UniformInt(1, 4);
    const Frames traj = RandomFrames(frames, k * 2, rng);
    std::vector<double> goal(k * 2);
    for (double& v : goal) v = rng.Uniform(-3.0, 3.0);
    const Frames at_goal(frames, goal);
    std::vector<CostFunction> families = AllFamilies(frames, k, rng);
    families.push_back(CostFunction::Default(k));
    for (const CostFunction& cost : families) {
      EXPECT_GE(cost.Evaluate(traj, goal), 0.0);
      EXPECT_EQ(cost.Evaluate(at_goal, goal), 0.0);
    }
  }
}

TEST(CostProperties, GradientsMatchFiniteDifferences) {
  Rng rng(321);
  const int frames = 4, k = 2;
  const Frames traj = RandomFrames(frames, k * 2, rng);
  std::vector<double> goal(k * 2);
  for (double& v : goal) v = rng.Uniform(-2.0, 2.0);

  for (const CostFunction& cost : AllFamilies(frames, k, rng)) {
    // Gradient with respect to the (flattened) trajectory.
    auto wrt_traj = [&](Graph& g, NodeId flat) {
      std::vector<NodeId> frame_nodes;
      for (int t = 0; t < frames; ++t) {
        frame_nodes.push_back(g.Slice(flat, t * k * 2, (t + 1) * k * 2));
      }
      const NodeId goal_node = g.Constant(Tensor::Vector(goal));
      return cost.Build(g, frame_nodes, goal_node, cost.MakeParamsNode(g, false));
    };
    std::vector<double> flat;
    for (const auto& f : traj) flat.insert(flat.end(), f.begin(), f.end());
    EXPECT_LT(FiniteDifferenceCheck(wrt_traj, Tensor::Vector(flat), 1e-5), 1e-6)
        << CostFamilyName(cost.family());

    // Gradient with respect to the parameters.
    auto wrt_psi = [&](Graph& g, NodeId psi) {
      std::vector<NodeId> frame_nodes;
      for (const auto& f : traj) frame_nodes.push_back(g.Constant(Tensor::Vector(f)));
      const NodeId goal_node = g.Constant(Tensor::Vector(goal));
      return cost.Build(g, frame_nodes, goal_node, psi);
    };
    EXPECT_LT(FiniteDifferenceCheck(wrt_psi, Tensor::Vector(cost.params()), 1e-5), 1e-6)
        << CostFamilyName(cost.family());
  }
}

TEST(RelativizeDemo, FirstFrameBecomesZeroAndRoundTrips) {
  SceneConfig scene;
  TaskSpec task;
  task.start_theta = {0.370321, 1.986553, -1.556966};
  task.dx = 0.2;
  task.horizon_steps = 6;
  const Demonstration demo = GenerateDemo(scene, task);
  const Demonstration rel = RelativizeDemo(demo);
  EXPECT_TRUE(rel.relative);
  for (const Keypoint& kp : rel.frames.front().keypoints) {
    EXPECT_EQ(kp.x, 0.0);
    EXPECT_EQ(kp.y, 0.0);
  }
  const Demonstration back = RebaseDemo(rel, demo.frames.front().keypoints);
  for (size_t t = 0; t < demo.frames.size(); ++t) {
    for (size_t k = 0; k < demo.frames[t].keypoints.size(); ++k) {
      EXPECT_EQ(back.frames[t].keypoints[k].x, demo.frames[t].keypoints[k].x);
      EXPECT_EQ(back.frames[t].keypoints[k].y, demo.frames[t].keypoints[k].y);
    }
  }
}

TEST(RelativizeDemo, RebasingOntoShiftedStartTranslatesGoal) {
  SceneConfig scene;
  TaskSpec task;
  task.start_theta = {0.370321, 1.986553, -1.556966};
  task.dx = 0.2;
  task.horizon_steps = 6;
  const Demonstration demo = GenerateDemo(scene, task);
  const Demonstration rel = RelativizeDemo(demo);

  std::vector<Keypoint> shifted = demo.frames.front().keypoints;
  const double sx = 7.0, sy = -4.0;
  for (Keypoint& kp : shifted) {
    kp.x += sx;
    kp.y += sy;
  }
  const Demonstration rebased = RebaseDemo(rel, shifted);
  const auto goal0 = GoalKeypointsXy(demo);
  const auto goal1 = GoalKeypointsXy(rebased);
  for (size_t i = 0; i < goal0.size(); i += 2) {
    EXPECT_NEAR(goal1[i] - goal0[i], sx, 1e-12);
    EXPECT_NEAR(goal1[i + 1] - goal0[i + 1], sy, 1e-12);
  }
}

}  // namespace
}  // namespace kpirl
