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

#include "kpirl/costs.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kpirl {

const char* CostFamilyName(CostFamily family) {
  switch (family) {
    case CostFamily::kWeighted: return "weighted";
    case CostFamily::kTimeDep: return "timedep";
    case CostFamily::kRbf: return "rbf";
    case CostFamily::kDefault: return "default";
  }
  return "?";
}

CostFamily CostFamilyFromName(const std::string& name) {
  if (name == "weighted") return CostFamily::kWeighted;
  if (name == "timedep") return CostFamily::kTimeDep;
  if (name == "rbf") return CostFamily::kRbf;
  if (name == "default") return CostFamily::kDefault;
  throw std::invalid_argument("unknown cost family '" + name + "'");
}

CostFunction CostFunction::Weighted(int num_keypoints, std::vector<double> psi) {
  CostFunction c;
  c.family_ = CostFamily::kWeighted;
  c.k_ = num_keypoints;
  c.params_ = psi.empty() ? std::vector<double>(num_keypoints * 2, 1.0) : std::move(psi);
  if (static_cast<int>(c.params_.size()) != num_keypoints * 2) {
    throw std::invalid_argument("weighted cost: expected K*2 parameters");
  }
  return c;
}

CostFunction CostFunction::TimeDep(int frames, int num_keypoints, std::vector<double> psi) {
  if (frames < 1) throw std::invalid_argument("timedep cost: needs at least one frame");
  CostFunction c;
  c.family_ = CostFamily::kTimeDep;
  c.k_ = num_keypoints;
  c.frames_ = frames;
  const int dim = frames * num_keypoints * 2;
  c.params_ = psi.empty() ? std::vector<double>(dim, 1.0) : std::move(psi);
  if (static_cast<int>(c.params_.size()) != dim) {
    throw std::invalid_argument("timedep cost: expected T*K*2 parameters");
  }
  return c;
}

CostFunction CostFunction::Rbf(int frames, int num_keypoints, int num_kernels,
                               std::vector<double> weights, double bandwidth) {
  if (num_kernels < 1) throw std::invalid_argument("rbf cost: needs at least one kernel");
  if (num_kernels >= frames) {
    throw std::invalid_argument("rbf cost: needs fewer kernels than frames (J < T)");
  }
  if (bandwidth > 0.0) {
    throw std::invalid_argument("rbf cost: bandwidth must be negative");
  }
  CostFunction c;
  c.family_ = CostFamily::kRbf;
  c.k_ = num_keypoints;
  c.frames_ = frames;
  c.kernels_ = num_kernels;
  const double spacing = num_kernels > 1
                             ? static_cast<double>(frames - 1) / (num_kernels - 1)
                             : static_cast<double>(frames - 1);
  c.centers_.resize(num_kernels);
  for (int j = 0; j < num_kernels; ++j) {
    c.centers_[j] = num_kernels > 1 ? 1.0 + spacing * j : 0.5 * (1.0 + frames);
  }
  // Neighboring kernels overlap at value 0.5 halfway between centers.
  c.bandwidth_ = bandwidth < 0.0
                     ? bandwidth
                     : -std::log(2.0) / ((spacing / 2.0) * (spacing / 2.0));
  const int dim = num_kernels * num_keypoints * 2;
  c.params_ = weights.empty() ? std::vector<double>(dim, 1.0) : std::move(weights);
  if (static_cast<int>(c.params_.size()) != dim) {
    throw std::invalid_argument("rbf cost: expected J*K*2 parameters");
  }
  return c;
}

CostFunction CostFunction::Default(int num_keypoints) {
  CostFunction c;
  c.family_ = CostFamily::kDefault;
  c.k_ = num_keypoints;
  return c;
}

void CostFunction::set_params(std::vector<double> params) {
  if (params.size() != params_.size()) {
    throw std::invalid_argument("cost: parameter size mismatch");
  }
  params_ = std::move(params);
}

double CostFunction::Kernel(int j, double t) const {
  if (family_ != CostFamily::kRbf) throw std::logic_error("Kernel() only for the rbf family");
  const double d = t - centers_[j];
  return std::exp(bandwidth_ * d * d);
}

NodeId CostFunction::MakeParamsNode(Graph& g, bool as_variable) const {
  if (!has_params()) return NodeId{};
  Tensor t = Tensor::Vector(params_);
  return as_variable ? g.Variable(std::move(t)) : g.Constant(std::move(t));
}

NodeId CostFunction::Build(Graph& g, std::span<const NodeId> frames_xy, NodeId goal_xy,
                           NodeId psi) const {
  const int dim = k_ * 2;
  if (static_cast<int>(g.value(goal_xy).size()) != dim) {
    throw std::invalid_argument("cost: goal has wrong dimension");
  }
  for (NodeId f : frames_xy) {
    if (static_cast<int>(g.value(f).size()) != dim) {
      throw std::invalid_argument("cost: trajectory frame has wrong dimension");
    }
  }
  if ((family_ == CostFamily::kTimeDep || family_ == CostFamily::kRbf) &&
      static_cast<int>(frames_xy.size()) != frames_) {
    throw std::invalid_argument("cost: trajectory has " + std::to_string(frames_xy.size()) +
                                " frames, cost was built for " + std::to_string(frames_));
  }
  if (has_params() && !psi.valid()) {
    throw std::invalid_argument("cost: missing parameter node, call MakeParamsNode");
  }

  std::vector<NodeId> sq;
  sq.reserve(frames_xy.size());
  for (NodeId f : frames_xy) sq.push_back(g.Square(g.Sub(f, goal_xy)));

  switch (family_) {
    case CostFamily::kDefault: {
      NodeId acc = g.Sum(sq[0]);
      for (size_t t = 1; t < sq.size(); ++t) acc = g.Add(acc, g.Sum(sq[t]));
      return acc;
    }
    case CostFamily::kWeighted: {
      NodeId total = sq[0];
      for (size_t t = 1; t < sq.size(); ++t) total = g.Add(total, sq[t]);
      return g.Dot(psi, total);
    }
    case CostFamily::kTimeDep: {
      NodeId acc{};
      for (size_t t = 0; t < sq.size(); ++t) {
        const int at = static_cast<int>(t) * dim;
        const NodeId term = g.Dot(g.Slice(psi, at, at + dim), sq[t]);
        acc = acc.valid() ? g.Add(acc, term) : term;
      }
      return acc;
    }
    case CostFamily::kRbf: {
      NodeId acc{};
      for (int j = 0; j < kernels_; ++j) {
        NodeId weighted{};
        for (size_t t = 0; t < sq.size(); ++t) {
          const double kappa = Kernel(j, static_cast<double>(t) + 1.0);
          const NodeId term = g.Scale(sq[t], kappa);
          weighted = weighted.valid() ? g.Add(weighted, term) : term;
        }
        const NodeId term = g.Dot(g.Slice(psi, j * dim, (j + 1) * dim), weighted);
        acc = acc.valid() ? g.Add(acc, term) : term;
      }
      return acc;
    }
  }
  throw std::logic_error("cost: unknown family");
}

double CostFunction::Evaluate(const std::vector<std::vector<double>>& frames_xy,
                              const std::vector<double>& goal_xy) const {
  Graph g;
  std::vector<NodeId> frames;
  frames.reserve(frames_xy.size());
  for (const auto& f : frames_xy) frames.push_back(g.Constant(Tensor::Vector(f)));
  const NodeId goal = g.Constant(Tensor::Vector(goal_xy));
  const NodeId psi = MakeParamsNode(g, /*as_variable=*/false);
  return g.scalar(Build(g, frames, goal, psi));
}

NodeId IrlLossNode(Graph& g, std::span<const NodeId> predicted_xy,
                   const std::vector<std::vector<double>>& demo_xy) {
  if (predicted_xy.size() != demo_xy.size()) {
    throw std::invalid_argument("irl loss: predicted horizon " +
                                std::to_string(predicted_xy.size()) + " vs demo " +
                                std::to_string(demo_xy.size()));
  }
  NodeId acc{};
  for (size_t t = 0; t < demo_xy.size(); ++t) {
    if (g.value(predicted_xy[t]).size() != static_cast<int64_t>(demo_xy[t].size())) {
      throw std::invalid_argument("irl loss: keypoint dimension mismatch at frame " +
                                  std::to_string(t));
    }
    const NodeId demo_t = g.Constant(Tensor::Vector(demo_xy[t]));
    const NodeId term = g.Sum(g.Square(g.Sub(demo_t, predicted_xy[t])));
    acc = acc.valid() ? g.Add(acc, term) : term;
  }
  return acc;
}

double IrlLoss(const std::vector<std::vector<double>>& demo_xy,
               const std::vector<std::vector<double>>& predicted_xy) {
  Graph g;
  std::vector<NodeId> pred;
  pred.reserve(predicted_xy.size());
  for (const auto& f : predicted_xy) pred.push_back(g.Constant(Tensor::Vector(f)));
  return g.scalar(IrlLossNode(g, pred, demo_xy));
}

Demonstration RelativizeDemo(const Demonstration& demo) {
  if (demo.frames.empty()) throw std::invalid_argument("relativize: empty demonstration");
  Demonstration out = demo;
  const std::vector<Keypoint> base = demo.frames.front().keypoints;
  for (auto& frame : out.frames) {
    for (size_t k = 0; k < frame.keypoints.size(); ++k) {
      frame.keypoints[k].x -= base[k].x;
      frame.keypoints[k].y -= base[k].y;
      frame.keypoints[k].intensity -= base[k].intensity;
    }
  }
  out.relative = true;
  return out;
}

Demonstration RebaseDemo(const Demonstration& relative_demo,
                         const std::vector<Keypoint>& initial_keypoints) {
  if (relative_demo.frames.empty()) throw std::invalid_argument("rebase: empty demonstration");
  if (relative_demo.frames.front().keypoints.size() != initial_keypoints.size()) {
    throw std::invalid_argument("rebase: keypoint count mismatch");
  }
  Demonstration out = relative_demo;
  for (auto& frame : out.frames) {
    for (size_t k = 0; k < frame.keypoints.size(); ++k) {
      frame.keypoints[k].x += initial_keypoints[k].x;
      frame.keypoints[k].y += initial_keypoints[k].y;
      frame.keypoints[k].intensity += initial_keypoints[k].intensity;
    }
  }
  out.relative = false;
  return out;
}

void ClampNonNegative(std::vector<double>& values) {
  for (double& v : values) v = std::max(v, 0.0);
}

}  // namespace kpirl
