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

#ifndef KPIRL_CORE_SIM_ENV_H_
#define KPIRL_CORE_SIM_ENV_H_

#include <array>
#include <cstdint>
#include <vector>

namespace kpirl {

inline constexpr int kArmDof = 3;

// Planar 3-link arm. Angle displacements are commanded per control step.
struct ArmConfig {
  std::array<double, kArmDof> link_lengths{0.4, 0.3, 0.2};
  std::array<double, kArmDof> joint_min{-2.8, -2.8, -2.8};
  std::array<double, kArmDof> joint_max{2.8, 2.8, 2.8};
  double step_limit = 0.15;      // max |u_i| per control step, radians
  double control_period = 0.2;   // seconds, 5 Hz
};

// Affine map from workspace meters to image pixels. The default maps the
// square [-1,1]^2 onto a 240x240 frame with the y axis flipped.
struct CameraMap {
  double scale_x = 120.0;
  double scale_y = -120.0;
  double offset_x = 120.0;
  double offset_y = 120.0;
  double frame_px = 240.0;

  std::array<double, 2> PixelOf(double wx, double wy) const {
    return {offset_x + scale_x * wx, offset_y + scale_y * wy};
  }
  std::array<double, 2> WorkspaceOf(double px, double py) const {
    return {(px - offset_x) / scale_x, (py - offset_y) / scale_y};
  }
};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double intensity = 1.0;  // in [0,1]
};

struct SystemState {
  std::array<double, kArmDof> theta{};
  std::array<double, kArmDof> thetadot{};
  std::vector<Keypoint> keypoints;
};

// Arm + camera + the keypoint rig: three markers at fixed offsets in the
// end-effector frame and one fixed background pixel.
struct SceneConfig {
  ArmConfig arm;
  CameraMap camera;
  std::vector<std::array<double, 2>> object_offsets{{0.05, 0.0}, {-0.03, 0.04}, {0.0, -0.05}};
  std::array<double, 2> background_px{40.0, 200.0};
  double pixel_noise_std = 0.0;  // additive observation noise on demo files

  int num_keypoints() const { return static_cast<int>(object_offsets.size()) + 1; }
};

struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
};

enum class TaskKind { kReaching, kPlacing };

// A scripted object motion: reaching slides the held object along the
// workspace x axis; placing moves along x for the first half of the horizon
// and down along y for the second half.
struct TaskSpec {
  TaskKind kind = TaskKind::kReaching;
  std::array<double, kArmDof> start_theta{};
  double dx = 0.25;   // total x displacement, meters
  double dy = -0.12;  // total y displacement (placing second phase)
  int horizon_steps = 24;  // commanded displacements; demo has horizon+1 frames
};

// Time-indexed states; frame 0 is the start state.
struct Trajectory {
  std::vector<SystemState> frames;

  int horizon() const { return static_cast<int>(frames.size()) - 1; }
};

struct Demonstration : Trajectory {
  bool relative = false;  // keypoints stored relative to the first frame
};

struct Transition {
  SystemState state;
  std::array<double, kArmDof> action{};
  SystemState next;
};

struct SineDataParams {
  std::vector<double> frequencies{0.10, 0.20, 0.35};  // Hz
  std::vector<double> amplitudes{0.08, 0.06, 0.05};   // radians per step, per segment
  std::array<double, kArmDof> joint_emphasis{1.0, 0.6, 1.0};
  std::array<double, kArmDof> start_theta{};
  // Uniform +-jitter added to each command; decorrelates the commanded
  // displacement from the velocity left by the previous step.
  double command_jitter = 0.0;
  int n_steps = 2000;
  uint64_t seed = 0;
};

PlanarPose ForwardKinematics(const ArmConfig& arm, const std::array<double, kArmDof>& theta);

// Jacobian of (x, y, phi) with respect to the joint angles, row-major 3x3.
std::array<double, 9> ArmJacobian(const ArmConfig& arm, const std::array<double, kArmDof>& theta);

std::vector<Keypoint> ObserveKeypoints(const SceneConfig& scene,
                                       const std::array<double, kArmDof>& theta);

SystemState MakeState(const SceneConfig& scene, const std::array<double, kArmDof>& theta,
                      const std::array<double, kArmDof>& thetadot = {});

// Applies a displacement command. Joint targets are clamped to the joint
// limits; per-component commands above the step limit are an error.
SystemState Step(const SceneConfig& scene, const SystemState& state,
                 const std::array<double, kArmDof>& u);

// Damped-least-squares IK toward a full planar pose. Throws if the target is
// unreachable within max_iters.
std::array<double, kArmDof> SolveIk(const ArmConfig& arm,
                                    const std::array<double, kArmDof>& theta_init,
                                    const PlanarPose& target, double damping = 1e-2,
                                    int max_iters = 200, double tolerance = 1e-11);

// Scripted-IK demonstration of the task. noise_seed only matters when the
// scene configures pixel noise.
Demonstration GenerateDemo(const SceneConfig& scene, const TaskSpec& task,
                           uint64_t noise_seed = 0);

// Self-supervised dynamics data from per-joint sinusoidal displacement
// commands, segmented over the configured frequencies/amplitudes.
std::vector<Transition> GenerateSineData(const SceneConfig& scene, const SineDataParams& params);

// Keypoints of a state flattened as (x, y, intensity) per keypoint.
std::vector<double> FlattenKeypoints(const SystemState& state);

// The x,y pixel coordinates of the last frame, flattened as K*2 values.
std::vector<double> GoalKeypointsXy(const Trajectory& traj);

// x,y pixel coordinates of one state, flattened as K*2 values.
std::vector<double> KeypointsXy(const SystemState& state);

}  // namespace kpirl

#endif  // KPIRL_CORE_SIM_ENV_H_
