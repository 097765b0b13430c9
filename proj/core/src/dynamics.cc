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

#include "kpirl/dynamics.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "kpirl/rng.h"

namespace kpirl {

MlpParams InitMlpParams(int num_keypoints, uint64_t seed, int hidden1, int hidden2,
                        double pixel_scale) {
  MlpParams p;
  p.num_keypoints = num_keypoints;
  p.pixel_scale = pixel_scale;
  const std::vector<int> sizes = {p.input_dim(), hidden1, hidden2, p.output_dim()};
  Rng rng(seed);
  for (size_t layer = 0; layer + 1 < sizes.size(); ++layer) {
    const int fan_in = sizes[layer];
    const int fan_out = sizes[layer + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<size_t>(fan_out) * fan_in);
    for (double& v : w) v = rng.Uniform(-bound, bound);
    p.weights.push_back(Tensor::Matrix(fan_out, fan_in, std::move(w)));
    p.biases.push_back(Tensor::Zeros(fan_out));
  }
  return p;
}

NodeId MlpForward(Graph& g, std::span<const NodeId> wb, NodeId input) {
  if (wb.size() < 2 || wb.size() % 2 != 0) {
    throw std::invalid_argument("mlp: expected alternating weight/bias nodes");
  }
  NodeId h = input;
  const size_t n_layers = wb.size() / 2;
  for (size_t layer = 0; layer < n_layers; ++layer) {
    h = g.Add(g.MatVec(wb[2 * layer], h), wb[2 * layer + 1]);
    if (layer + 1 < n_layers) h = g.Relu(h);
  }
  return h;
}

namespace {

// Per-dimension input/output scaling: pixel coordinates by pixel_scale,
// intensity and joint channels untouched.
std::vector<double> KeypointScaleVector(int k, double scale) {
  std::vector<double> s;
  s.reserve(static_cast<size_t>(k) * 3);
  for (int i = 0; i < k; ++i) {
    s.push_back(scale);
    s.push_back(scale);
    s.push_back(1.0);
  }
  return s;
}

std::vector<double> ScaledMlpInput(const MlpParams& p, const std::vector<double>& kp_flat,
                                   const std::array<double, kArmDof>& theta,
                                   const std::array<double, kArmDof>& thetadot,
                                   const std::array<double, kArmDof>& u) {
  std::vector<double> x;
  x.reserve(p.input_dim());
  const std::vector<double> s = KeypointScaleVector(p.num_keypoints, p.pixel_scale);
  for (size_t i = 0; i < kp_flat.size(); ++i) x.push_back(kp_flat[i] * s[i]);
  x.insert(x.end(), theta.begin(), theta.end());
  x.insert(x.end(), thetadot.begin(), thetadot.end());
  x.insert(x.end(), u.begin(), u.end());
  return x;
}

std::vector<double> NumericMlpForward(const MlpParams& p, const std::vector<double>& input) {
  std::vector<double> h = input;
  for (size_t layer = 0; layer < p.weights.size(); ++layer) {
    const Tensor& w = p.weights[layer];
    const Tensor& b = p.biases[layer];
    std::vector<double> out(w.rows());
    for (int r = 0; r < w.rows(); ++r) {
      double acc = b[r];
      for (int c = 0; c < w.cols(); ++c) acc += w.at(r, c) * h[c];
      out[r] = acc;
    }
    if (layer + 1 < p.weights.size()) {
      for (double& v : out) v = v > 0.0 ? v : 0.0;
    }
    h = std::move(out);
  }
  return h;
}

}  // namespace

StateNodes GroundTruthDynamics::PredictNodes(Graph& g, std::span<const NodeId> params,
                                             const StateNodes& s, NodeId u) const {
  (void)params;
  const NodeId theta_next = g.Add(s.theta, u);
  // Mirror ObserveKeypoints / ForwardKinematics expression for expression so
  // that ground-truth rollouts match simulator executions bit for bit.
  const NodeId c1 = g.Slice(theta_next, 0, 1);
  const NodeId c2 = g.Add(c1, g.Slice(theta_next, 1, 2));
  const NodeId c3 = g.Add(c2, g.Slice(theta_next, 2, 3));
  const NodeId cos1 = g.Cos(c1), cos2 = g.Cos(c2), cos3 = g.Cos(c3);
  const NodeId sin1 = g.Sin(c1), sin2 = g.Sin(c2), sin3 = g.Sin(c3);
  const auto& l = scene_.arm.link_lengths;
  const NodeId ee_x =
      g.Add(g.Add(g.Scale(cos1, l[0]), g.Scale(cos2, l[1])), g.Scale(cos3, l[2]));
  const NodeId ee_y =
      g.Add(g.Add(g.Scale(sin1, l[0]), g.Scale(sin2, l[1])), g.Scale(sin3, l[2]));

  const CameraMap& cam = scene_.camera;
  std::vector<NodeId> pieces;
  pieces.reserve(scene_.object_offsets.size() * 3 + 3);
  const NodeId one = g.Constant(Tensor::Scalar(1.0));
  for (const auto& off : scene_.object_offsets) {
    const NodeId wx = g.Add(ee_x, g.Sub(g.Scale(cos3, off[0]), g.Scale(sin3, off[1])));
    const NodeId wy = g.Add(ee_y, g.Add(g.Scale(sin3, off[0]), g.Scale(cos3, off[1])));
    const NodeId px = g.Add(g.Constant(Tensor::Scalar(cam.offset_x)), g.Scale(wx, cam.scale_x));
    const NodeId py = g.Add(g.Constant(Tensor::Scalar(cam.offset_y)), g.Scale(wy, cam.scale_y));
    pieces.push_back(px);
    pieces.push_back(py);
    pieces.push_back(one);
  }
  pieces.push_back(g.Constant(Tensor::Scalar(scene_.background_px[0])));
  pieces.push_back(g.Constant(Tensor::Scalar(scene_.background_px[1])));
  pieces.push_back(one);

  StateNodes next;
  next.keypoints = g.Concat(pieces);
  next.theta = theta_next;
  next.thetadot = s.thetadot;
  return next;
}

std::vector<NodeId> LearnedDynamics::BindParams(Graph& g) const {
  std::vector<NodeId> wb;
  wb.reserve(params_.weights.size() * 2);
  for (size_t layer = 0; layer < params_.weights.size(); ++layer) {
    wb.push_back(g.Constant(params_.weights[layer]));
    wb.push_back(g.Constant(params_.biases[layer]));
  }
  return wb;
}

StateNodes LearnedDynamics::PredictNodes(Graph& g, std::span<const NodeId> params,
                                         const StateNodes& s, NodeId u) const {
  if (params.size() != params_.weights.size() * 2) {
    throw std::invalid_argument("learned dynamics: call BindParams and pass the handle");
  }
  const int k = params_.num_keypoints;
  const NodeId in_scale =
      g.Constant(Tensor::Vector(KeypointScaleVector(k, params_.pixel_scale)));
  std::vector<double> inv(KeypointScaleVector(k, params_.pixel_scale));
  for (double& v : inv) v = 1.0 / v;
  const NodeId out_scale = g.Constant(Tensor::Vector(inv));

  const NodeId scaled_kp = g.Mul(s.keypoints, in_scale);
  const NodeId parts[] = {scaled_kp, s.theta, s.thetadot, u};
  const NodeId input = g.Concat(parts);
  const NodeId out = MlpForward(g, params, input);

  StateNodes next;
  next.keypoints = g.Mul(out, out_scale);
  next.theta = g.Add(s.theta, u);
  next.thetadot = s.thetadot;
  return next;
}

StateNodes MakeStateNodes(Graph& g, const SystemState& s, bool as_variable) {
  auto make = [&](std::vector<double> v) {
    Tensor t = Tensor::Vector(std::move(v));
    return as_variable ? g.Variable(std::move(t)) : g.Constant(std::move(t));
  };
  StateNodes n;
  n.keypoints = make(FlattenKeypoints(s));
  n.theta = make({s.theta.begin(), s.theta.end()});
  n.thetadot = make({s.thetadot.begin(), s.thetadot.end()});
  return n;
}

RolloutNodes RecordRollout(Graph& g, const DynamicsModel& model, std::span<const NodeId> params,
                           const StateNodes& s0, std::span<const NodeId> u_steps) {
  RolloutNodes out;
  out.frames.reserve(u_steps.size() + 1);
  out.frames.push_back(s0);
  StateNodes cur = s0;
  for (NodeId u : u_steps) {
    cur = model.PredictNodes(g, params, cur, u);
    out.frames.push_back(cur);
  }
  return out;
}

namespace {

SystemState StateFromNodeValues(const Graph& g, const StateNodes& n) {
  SystemState s;
  const Tensor& z = g.value(n.keypoints);
  const Tensor& th = g.value(n.theta);
  const Tensor& thd = g.value(n.thetadot);
  for (int j = 0; j < kArmDof; ++j) {
    s.theta[j] = th[j];
    s.thetadot[j] = thd[j];
  }
  const int k = static_cast<int>(z.size()) / 3;
  s.keypoints.resize(k);
  for (int i = 0; i < k; ++i) {
    s.keypoints[i] = Keypoint{z[i * 3], z[i * 3 + 1], z[i * 3 + 2]};
  }
  return s;
}

}  // namespace

SystemState DynamicsModel::Predict(const SystemState& s,
                                   const std::array<double, kArmDof>& u) const {
  Graph g;
  const std::vector<NodeId> params = BindParams(g);
  const StateNodes s0 = MakeStateNodes(g, s);
  const NodeId u_node = g.Constant(Tensor::Vector({u.begin(), u.end()}));
  const StateNodes next = PredictNodes(g, params, s0, u_node);
  return StateFromNodeValues(g, next);
}

Trajectory RolloutWithModel(const DynamicsModel& model, const SystemState& s0,
                            const std::vector<std::array<double, kArmDof>>& actions) {
  Graph g;
  const std::vector<NodeId> params = model.BindParams(g);
  const StateNodes start = MakeStateNodes(g, s0);
  std::vector<NodeId> u_nodes;
  u_nodes.reserve(actions.size());
  for (const auto& u : actions) {
    u_nodes.push_back(g.Constant(Tensor::Vector({u.begin(), u.end()})));
  }
  const RolloutNodes nodes = RecordRollout(g, model, params, start, u_nodes);
  Trajectory traj;
  traj.frames.push_back(s0);
  for (size_t t = 1; t < nodes.frames.size(); ++t) {
    traj.frames.push_back(StateFromNodeValues(g, nodes.frames[t]));
  }
  return traj;
}

NmseResult Nmse(const std::vector<std::vector<double>>& predictions,
                const std::vector<std::vector<double>>& targets) {
  if (predictions.size() != targets.size() || targets.size() < 2) {
    throw std::invalid_argument("nmse: need >= 2 equally many predictions and targets");
  }
  const size_t dims = targets[0].size();
  for (size_t i = 0; i < targets.size(); ++i) {
    if (predictions[i].size() != dims || targets[i].size() != dims) {
      throw std::invalid_argument("nmse: inconsistent dimensionality");
    }
  }
  const double n = static_cast<double>(targets.size());
  NmseResult result;
  int included = 0;
  double acc = 0.0;
  for (size_t d = 0; d < dims; ++d) {
    double mean = 0.0;
    for (const auto& t : targets) mean += t[d];
    mean /= n;
    double var = 0.0, mse = 0.0;
    for (size_t i = 0; i < targets.size(); ++i) {
      var += (targets[i][d] - mean) * (targets[i][d] - mean);
      mse += (predictions[i][d] - targets[i][d]) * (predictions[i][d] - targets[i][d]);
    }
    var /= n;
    mse /= n;
    // Accumulated rounding can leave a constant dimension with a variance of
    // ~1e-30; anything at that scale counts as zero.
    if (var <= 1e-20 * std::max(1.0, mean * mean)) {
      result.excluded_dims++;
      continue;
    }
    acc += mse / var;
    included++;
  }
  result.value = included > 0 ? acc / included : 0.0;
  return result;
}

namespace {

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  int64_t step = 0;
};

std::vector<double> PredictScaledNumeric(const MlpParams& p, const Transition& tr) {
  return NumericMlpForward(
      p, ScaledMlpInput(p, FlattenKeypoints(tr.state), tr.state.theta, tr.state.thetadot,
                        tr.action));
}

std::vector<double> ScaledTarget(const MlpParams& p, const Transition& tr) {
  const std::vector<double> flat = FlattenKeypoints(tr.next);
  const std::vector<double> s = KeypointScaleVector(p.num_keypoints, p.pixel_scale);
  std::vector<double> out(flat.size());
  for (size_t i = 0; i < flat.size(); ++i) out[i] = flat[i] * s[i];
  return out;
}

NmseResult DatasetNmse(const MlpParams& p, const std::vector<Transition>& data,
                       const std::vector<int>& idx) {
  std::vector<std::vector<double>> preds, tgts;
  preds.reserve(idx.size());
  tgts.reserve(idx.size());
  for (int i : idx) {
    preds.push_back(PredictScaledNumeric(p, data[i]));
    tgts.push_back(ScaledTarget(p, data[i]));
  }
  return Nmse(preds, tgts);
}

double DatasetMse(const MlpParams& p, const std::vector<Transition>& data,
                  const std::vector<int>& idx) {
  double acc = 0.0;
  int64_t count = 0;
  for (int i : idx) {
    const auto pred = PredictScaledNumeric(p, data[i]);
    const auto tgt = ScaledTarget(p, data[i]);
    for (size_t d = 0; d < tgt.size(); ++d) {
      acc += (pred[d] - tgt[d]) * (pred[d] - tgt[d]);
      count++;
    }
  }
  return count > 0 ? acc / static_cast<double>(count) : 0.0;
}

}  // namespace

TrainedDynamics TrainDynamics(const std::vector<Transition>& dataset, const TrainHyperparams& hp,
                              uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  const int k = static_cast<int>(dataset[0].state.keypoints.size());

  TrainedDynamics out;
  out.params = InitMlpParams(k, seed, hp.hidden1, hp.hidden2, hp.pixel_scale);
  MlpParams& p = out.params;
  TrainReport& report = out.report;
  report.pixel_scale = hp.pixel_scale;

  // Seeded 90/10 split.
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<int> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.Shuffle(idx);
  const int n_holdout =
      std::max(dataset.size() >= 2 ? 1 : 0,
               static_cast<int>(hp.holdout_fraction * static_cast<double>(dataset.size())));
  std::vector<int> train_idx(idx.begin(), idx.end() - n_holdout);
  std::vector<int> holdout_idx(idx.end() - n_holdout, idx.end());
  if (train_idx.empty()) train_idx = idx;

  // Per-dimension loss weights from the train-split target variance; zero
  // weight excludes constant dimensions (intensity, background pixel).
  const int dims = p.output_dim();
  std::vector<double> mean(dims, 0.0), var(dims, 0.0);
  for (int i : train_idx) {
    const auto t = ScaledTarget(p, dataset[i]);
    for (int d = 0; d < dims; ++d) mean[d] += t[d];
  }
  for (double& m : mean) m /= static_cast<double>(train_idx.size());
  for (int i : train_idx) {
    const auto t = ScaledTarget(p, dataset[i]);
    for (int d = 0; d < dims; ++d) var[d] += (t[d] - mean[d]) * (t[d] - mean[d]);
  }
  for (double& v : var) v /= static_cast<double>(train_idx.size());
  std::vector<double> loss_weights(dims, 0.0);
  int included = 0;
  for (int d = 0; d < dims; ++d) {
    if (var[d] > 1e-20 * std::max(1.0, mean[d] * mean[d])) {
      loss_weights[d] = 1.0 / var[d];
      included++;
    } else {
      report.excluded_dims++;
    }
  }
  // A fully constant target (degenerate dataset) falls back to a plain
  // squared-error objective; the reported metric is then an MSE.
  const bool mse_fallback = included == 0;
  if (mse_fallback) {
    std::fill(loss_weights.begin(), loss_weights.end(), 1.0 / dims);
    report.excluded_dims = dims;
  } else {
    for (double& w : loss_weights) w /= included;
  }

  AdamState adam;
  for (size_t layer = 0; layer < p.weights.size(); ++layer) {
    adam.m.push_back(std::vector<double>(p.weights[layer].size(), 0.0));
    adam.m.push_back(std::vector<double>(p.biases[layer].size(), 0.0));
  }
  adam.v = adam.m;

  auto metric = [&](const std::vector<int>& which) {
    return mse_fallback ? DatasetMse(p, dataset, which) : DatasetNmse(p, dataset, which).value;
  };
  const double initial_nmse = metric(train_idx);
  int bad_epochs = 0;
  std::vector<int> order = train_idx;

  for (int epoch = 0; epoch < hp.epochs && !report.diverged; ++epoch) {
    rng.Shuffle(order);
    for (size_t start = 0; start < order.size(); start += hp.batch_size) {
      try {
      const size_t stop = std::min(order.size(), start + hp.batch_size);
      Graph g;
      std::vector<NodeId> wb;
      for (size_t layer = 0; layer < p.weights.size(); ++layer) {
        wb.push_back(g.Variable(p.weights[layer]));
        wb.push_back(g.Variable(p.biases[layer]));
      }
      const NodeId w_node = g.Constant(Tensor::Vector(loss_weights));
      NodeId loss{-1};
      for (size_t bi = start; bi < stop; ++bi) {
        const Transition& tr = dataset[order[bi]];
        std::vector<double> kp_in = FlattenKeypoints(tr.state);
        if (hp.input_kp_noise_px > 0.0) {
          for (size_t i = 0; i < kp_in.size(); ++i) {
            if (i % 3 != 2) kp_in[i] += rng.Normal(0.0, hp.input_kp_noise_px);
          }
        }
        const NodeId x = g.Constant(Tensor::Vector(
            ScaledMlpInput(p, kp_in, tr.state.theta, tr.state.thetadot, tr.action)));
        const NodeId pred = MlpForward(g, wb, x);
        const NodeId err = g.Sub(pred, g.Constant(Tensor::Vector(ScaledTarget(p, tr))));
        const NodeId contrib = g.Dot(g.Square(err), w_node);
        loss = loss.valid() ? g.Add(loss, contrib) : contrib;
      }
      loss = g.Scale(loss, 1.0 / static_cast<double>(stop - start));
      const std::vector<NodeId> grads = g.Gradient(loss, wb);

      adam.step++;
      const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(adam.step));
      const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(adam.step));
      for (size_t t = 0; t < wb.size(); ++t) {
        const std::vector<double>& gv = g.value(grads[t]).values();
        std::vector<double>& m = adam.m[t];
        std::vector<double>& v = adam.v[t];
        std::vector<double>& param = (t % 2 == 0 ? p.weights[t / 2] : p.biases[t / 2])
                                         .mutable_values();
        for (size_t i = 0; i < gv.size(); ++i) {
          m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * gv[i];
          v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * gv[i] * gv[i];
          const double mhat = m[i] / bc1;
          const double vhat = v[i] / bc2;
          param[i] -= hp.learning_rate * mhat / (std::sqrt(vhat) + hp.adam_epsilon);
        }
      }
      } catch (const std::domain_error&) {
        // Non-finite values in the batch graph: the optimization blew up.
        report.diverged = true;
        report.divergence_epoch = epoch;
        break;
      }
    }
    if (report.diverged) break;

    report.train_nmse.push_back(metric(train_idx));
    report.holdout_nmse.push_back(
        holdout_idx.empty() ? report.train_nmse.back() : metric(holdout_idx));
    if (!std::isfinite(report.train_nmse.back()) ||
        report.train_nmse.back() > 10.0 * initial_nmse) {
      if (++bad_epochs >= 3) {
        report.diverged = true;
        report.divergence_epoch = epoch;
        break;
      }
    } else {
      bad_epochs = 0;
    }
  }
  return out;
}

void SaveCheckpoint(const std::string& path, const MlpParams& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  const char magic[8] = {'K', 'P', 'D', 'Y', 'N', 'C', 'K', '1'};
  f.write(magic, 8);
  auto put_i32 = [&](int32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_f64 = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  put_i32(params.num_keypoints);
  put_i32(params.dof);
  put_i32(static_cast<int32_t>(params.weights.size()));
  put_f64(params.pixel_scale);
  for (size_t layer = 0; layer < params.weights.size(); ++layer) {
    put_i32(params.weights[layer].rows());
    put_i32(params.weights[layer].cols());
  }
  for (size_t layer = 0; layer < params.weights.size(); ++layer) {
    const auto& w = params.weights[layer].values();
    const auto& b = params.biases[layer].values();
    f.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * 8));
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size() * 8));
  }
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

MlpParams LoadCheckpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "KPDYNCK1", 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  auto get_i32 = [&]() {
    int32_t v;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get_f64 = [&]() {
    double v;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  MlpParams p;
  p.num_keypoints = get_i32();
  p.dof = get_i32();
  const int n_layers = get_i32();
  p.pixel_scale = get_f64();
  if (!f || n_layers <= 0 || n_layers > 16) {
    throw std::runtime_error("checkpoint: corrupt header in " + path);
  }
  std::vector<std::pair<int32_t, int32_t>> shapes;
  for (int layer = 0; layer < n_layers; ++layer) {
    const int32_t rows = get_i32();
    const int32_t cols = get_i32();
    shapes.emplace_back(rows, cols);
  }
  for (int layer = 0; layer < n_layers; ++layer) {
    const auto [rows, cols] = shapes[layer];
    std::vector<double> w(static_cast<size_t>(rows) * cols);
    std::vector<double> b(rows);
    f.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * 8));
    f.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * 8));
    if (!f) throw std::runtime_error("checkpoint: truncated " + path);
    p.weights.push_back(Tensor::Matrix(rows, cols, std::move(w)));
    p.biases.push_back(Tensor::Vector(std::move(b)));
  }
  return p;
}

}  // namespace kpirl
