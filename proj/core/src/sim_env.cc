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

#include "kpirl/sim_env.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "kpirl/rng.h"

namespace kpirl {

namespace {

constexpr double kPi = 3.14159265358979323846;

double WrapAngle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

void CheckWithinLimits(const ArmConfig& arm, const std::array<double, kArmDof>& theta) {
  for (int j = 0; j < kArmDof; ++j) {
    if (theta[j] < arm.joint_min[j] || theta[j] > arm.joint_max[j]) {
      throw std::invalid_argument("joint " + std::to_string(j + 1) + " angle " +
                                  std::to_string(theta[j]) + " outside limits");
    }
  }
}

// Solves the symmetric 3x3 system A x = b by Gaussian elimination with
// partial pivoting.
std::array<double, 3> Solve3(std::array<double, 9> a, std::array<double, 3> b) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(a[r * 3 + col]) > std::fabs(a[pivot * 3 + col])) pivot = r;
    }
    if (std::fabs(a[pivot * 3 + col]) < 1e-300) {
      throw std::runtime_error("ik: singular system");
    }
    if (pivot != col) {
      for (int c = 0; c < 3; ++c) std::swap(a[col * 3 + c], a[pivot * 3 + c]);
      std::swap(b[col], b[pivot]);
    }
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r * 3 + col] / a[col * 3 + col];
      for (int c = col; c < 3; ++c) a[r * 3 + c] -= f * a[col * 3 + c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 3; ++c) acc -= a[r * 3 + c] * x[c];
    x[r] = acc / a[r * 3 + r];
  }
  return x;
}

}  // namespace

PlanarPose ForwardKinematics(const ArmConfig& arm, const std::array<double, kArmDof>& theta) {
  CheckWithinLimits(arm, theta);
  // Evaluation order matches the tape-based adapter in dynamics.cc so that
  // ground-truth rollouts reproduce simulator trajectories bit for bit.
  const double c1 = theta[0];
  const double c2 = c1 + theta[1];
  const double c3 = c2 + theta[2];
  PlanarPose pose;
  pose.x = std::cos(c1) * arm.link_lengths[0] + std::cos(c2) * arm.link_lengths[1] +
           std::cos(c3) * arm.link_lengths[2];
  pose.y = std::sin(c1) * arm.link_lengths[0] + std::sin(c2) * arm.link_lengths[1] +
           std::sin(c3) * arm.link_lengths[2];
  pose.phi = c3;
  return pose;
}

std::array<double, 9> ArmJacobian(const ArmConfig& arm, const std::array<double, kArmDof>& theta) {
  const double c1 = theta[0];
  const double c2 = c1 + theta[1];
  const double c3 = c2 + theta[2];
  const double l1 = arm.link_lengths[0];
  const double l2 = arm.link_lengths[1];
  const double l3 = arm.link_lengths[2];
  const double s1 = std::sin(c1), s2 = std::sin(c2), s3 = std::sin(c3);
  const double k1 = std::cos(c1), k2 = std::cos(c2), k3 = std::cos(c3);
  // dx/dtheta_j = -sum of l_i sin(c_i) for links i >= j.
  return {
      -l1 * s1 - l2 * s2 - l3 * s3, -l2 * s2 - l3 * s3, -l3 * s3,
      l1 * k1 + l2 * k2 + l3 * k3,  l2 * k2 + l3 * k3,  l3 * k3,
      1.0,                          1.0,                1.0,
  };
}

std::vector<Keypoint> ObserveKeypoints(const SceneConfig& scene,
                                       const std::array<double, kArmDof>& theta) {
  const PlanarPose ee = ForwardKinematics(scene.arm, theta);
  const double c3 = ee.phi;
  const double cphi = std::cos(c3);
  const double sphi = std::sin(c3);
  std::vector<Keypoint> kps;
  kps.reserve(scene.object_offsets.size() + 1);
  for (const auto& off : scene.object_offsets) {
    // Same expression structure as the differentiable adapter.
    const double wx = ee.x + (cphi * off[0] - sphi * off[1]);
    const double wy = ee.y + (sphi * off[0] + cphi * off[1]);
    Keypoint kp;
    kp.x = scene.camera.offset_x + wx * scene.camera.scale_x;
    kp.y = scene.camera.offset_y + wy * scene.camera.scale_y;
    kp.intensity = 1.0;
    kps.push_back(kp);
  }
  kps.push_back(Keypoint{scene.background_px[0], scene.background_px[1], 1.0});
  return kps;
}

SystemState MakeState(const SceneConfig& scene, const std::array<double, kArmDof>& theta,
                      const std::array<double, kArmDof>& thetadot) {
  SystemState s;
  s.theta = theta;
  s.thetadot = thetadot;
  s.keypoints = ObserveKeypoints(scene, theta);
  return s;
}

SystemState Step(const SceneConfig& scene, const SystemState& state,
                 const std::array<double, kArmDof>& u) {
  for (int j = 0; j < kArmDof; ++j) {
    if (std::fabs(u[j]) > scene.arm.step_limit) {
      throw std::invalid_argument("step: command " + std::to_string(u[j]) + " for joint " +
                                  std::to_string(j + 1) + " exceeds displacement limit " +
                                  std::to_string(scene.arm.step_limit));
    }
  }
  SystemState next;
  for (int j = 0; j < kArmDof; ++j) {
    const double raw = state.theta[j] + u[j];
    next.theta[j] = std::clamp(raw, scene.arm.joint_min[j], scene.arm.joint_max[j]);
    next.thetadot[j] = (next.theta[j] - state.theta[j]) / scene.arm.control_period;
  }
  next.keypoints = ObserveKeypoints(scene, next.theta);
  return next;
}

std::array<double, kArmDof> SolveIk(const ArmConfig& arm,
                                    const std::array<double, kArmDof>& theta_init,
                                    const PlanarPose& target, double damping, int max_iters,
                                    double tolerance) {
  std::array<double, kArmDof> theta = theta_init;
  const double reach =
      arm.link_lengths[0] + arm.link_lengths[1] + arm.link_lengths[2];
  if (std::hypot(target.x, target.y) > reach) {
    throw std::runtime_error("ik: target beyond reach");
  }
  for (int it = 0; it < max_iters; ++it) {
    const PlanarPose pose = ForwardKinematics(arm, theta);
    const std::array<double, 3> err = {target.x - pose.x, target.y - pose.y,
                                       WrapAngle(target.phi - pose.phi)};
    const double norm = std::sqrt(err[0] * err[0] + err[1] * err[1] + err[2] * err[2]);
    if (norm < tolerance) return theta;

    const std::array<double, 9> jac = ArmJacobian(arm, theta);
    // A = J J^T + damping^2 I
    std::array<double, 9> a{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += jac[r * 3 + k] * jac[c * 3 + k];
        a[r * 3 + c] = acc;
      }
      a[r * 3 + r] += damping * damping;
    }
    const std::array<double, 3> y = Solve3(a, err);
    for (int j = 0; j < kArmDof; ++j) {
      double dj = 0.0;
      for (int r = 0; r < 3; ++r) dj += jac[r * 3 + j] * y[r];
      dj = std::clamp(dj, -0.2, 0.2);
      theta[j] = std::clamp(theta[j] + dj, arm.joint_min[j], arm.joint_max[j]);
    }
  }
  throw std::runtime_error("ik: no convergence within iteration budget");
}

namespace {

PlanarPose PathPoint(const TaskSpec& task, const PlanarPose& start, int t) {
  PlanarPose p = start;
  const int h = task.horizon_steps;
  if (task.kind == TaskKind::kReaching) {
    p.x = start.x + task.dx * static_cast<double>(t) / h;
    return p;
  }
  const int h1 = h / 2;
  if (t <= h1) {
    p.x = start.x + task.dx * static_cast<double>(t) / h1;
  } else {
    p.x = start.x + task.dx;
    p.y = start.y + task.dy * static_cast<double>(t - h1) / (h - h1);
  }
  return p;
}

}  // namespace

Demonstration GenerateDemo(const SceneConfig& scene, const TaskSpec& task, uint64_t noise_seed) {
  if (task.horizon_steps < 1) {
    throw std::invalid_argument("demo: horizon must be at least 1 step");
  }
  Demonstration demo;
  Rng noise(noise_seed);
  SystemState state = MakeState(scene, task.start_theta);
  const PlanarPose start_pose = ForwardKinematics(scene.arm, task.start_theta);
  auto record = [&](const SystemState& s) {
    SystemState copy = s;
    if (scene.pixel_noise_std > 0.0) {
      for (auto& kp : copy.keypoints) {
        kp.x += noise.Normal(0.0, scene.pixel_noise_std);
        kp.y += noise.Normal(0.0, scene.pixel_noise_std);
      }
    }
    demo.frames.push_back(std::move(copy));
  };
  record(state);
  for (int t = 1; t <= task.horizon_steps; ++t) {
    const PlanarPose target = PathPoint(task, start_pose, t);
    std::array<double, kArmDof> theta_next;
    try {
      theta_next = SolveIk(scene.arm, state.theta, target);
    } catch (const std::exception& e) {
      throw std::runtime_error("demo: frame " + std::to_string(t) +
                               " unreachable: " + e.what());
    }
    std::array<double, kArmDof> u;
    for (int j = 0; j < kArmDof; ++j) {
      u[j] = theta_next[j] - state.theta[j];
      if (std::fabs(u[j]) > scene.arm.step_limit) {
        throw std::runtime_error("demo: frame " + std::to_string(t) +
                                 " needs displacement beyond the step limit");
      }
    }
    state = Step(scene, state, u);
    record(state);
  }
  return demo;
}

std::vector<Transition> GenerateSineData(const SceneConfig& scene, const SineDataParams& params) {
  if (params.frequencies.empty() || params.frequencies.size() != params.amplitudes.size()) {
    throw std::invalid_argument("sine data: need matching frequency/amplitude lists");
  }
  for (size_t k = 0; k < params.amplitudes.size(); ++k) {
    double max_amp = 0.0;
    for (int j = 0; j < kArmDof; ++j) {
      max_amp = std::max(max_amp, params.amplitudes[k] * params.joint_emphasis[j]);
    }
    if (max_amp > scene.arm.step_limit) {
      throw std::invalid_argument("sine data: amplitude exceeds the step limit");
    }
  }
  Rng rng(params.seed);
  std::array<double, kArmDof> phase;
  for (int j = 0; j < kArmDof; ++j) phase[j] = rng.Uniform(0.0, 2.0 * kPi);

  const int n_segments = static_cast<int>(params.frequencies.size());
  const int seg_len = params.n_steps / n_segments + 1;
  std::vector<Transition> data;
  data.reserve(params.n_steps);
  SystemState state = MakeState(scene, params.start_theta);
  for (int t = 0; t < params.n_steps; ++t) {
    const int seg = std::min(t / seg_len, n_segments - 1);
    const double freq = params.frequencies[seg];
    const double amp = params.amplitudes[seg];
    const double time = t * scene.arm.control_period;
    std::array<double, kArmDof> u;
    for (int j = 0; j < kArmDof; ++j) {
      u[j] = amp * params.joint_emphasis[j] * std::sin(2.0 * kPi * freq * time + phase[j]);
      if (params.command_jitter > 0.0) {
        u[j] += rng.Uniform(-params.command_jitter, params.command_jitter);
      }
      u[j] = std::clamp(u[j], -scene.arm.step_limit, scene.arm.step_limit);
    }
    Transition tr;
    tr.state = state;
    tr.action = u;
    tr.next = Step(scene, state, u);
    state = tr.next;
    data.push_back(std::move(tr));
  }
  return data;
}

std::vector<double> FlattenKeypoints(const SystemState& state) {
  std::vector<double> flat;
  flat.reserve(state.keypoints.size() * 3);
  for (const Keypoint& kp : state.keypoints) {
    flat.push_back(kp.x);
    flat.push_back(kp.y);
    flat.push_back(kp.intensity);
  }
  return flat;
}

std::vector<double> KeypointsXy(const SystemState& state) {
  std::vector<double> flat;
  flat.reserve(state.keypoints.size() * 2);
  for (const Keypoint& kp : state.keypoints) {
    flat.push_back(kp.x);
    flat.push_back(kp.y);
  }
  return flat;
}

std::vector<double> GoalKeypointsXy(const Trajectory& traj) {
  if (traj.frames.empty()) {
    throw std::invalid_argument("trajectory has no frames");
  }
  return KeypointsXy(traj.frames.back());
}

}  // namespace kpirl
