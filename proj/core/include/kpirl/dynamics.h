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

#ifndef KPIRL_CORE_DYNAMICS_H_
#define KPIRL_CORE_DYNAMICS_H_

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kpirl/graph.h"
#include "kpirl/sim_env.h"

namespace kpirl {

// One system state recorded on a graph: keypoints flattened as (x,y,mu) per
// keypoint in pixel units, plus the joint state.
struct StateNodes {
  NodeId keypoints;  // [K*3]
  NodeId theta;      // [dof]
  NodeId thetadot;   // [dof]
};

// Weights of the keypoint predictor: input -> 100 -> 25 -> output with
// rectified-linear activations after the hidden layers. Input is the
// flattened (keypoints, theta, thetadot, u); output the next keypoints.
// Pixel coordinates enter and leave scaled by pixel_scale.
struct MlpParams {
  int num_keypoints = 4;
  int dof = kArmDof;
  std::vector<Tensor> weights;  // [out,in] per layer
  std::vector<Tensor> biases;   // [out] per layer
  double pixel_scale = 1.0 / 240.0;

  int input_dim() const { return num_keypoints * 3 + 3 * dof; }
  int output_dim() const { return num_keypoints * 3; }
};

// Seeded Glorot-uniform initialization, zero biases.
MlpParams InitMlpParams(int num_keypoints, uint64_t seed, int hidden1 = 100, int hidden2 = 25,
                        double pixel_scale = 1.0 / 240.0);

// One-step latent dynamics. Both variants integrate the joint state exactly
// (theta' = theta + u, thetadot' = thetadot) and differ only in how the next
// keypoints are produced.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int num_keypoints() const = 0;

  // Records per-graph parameter nodes; the handle is passed to PredictNodes.
  virtual std::vector<NodeId> BindParams(Graph& g) const {
    (void)g;
    return {};
  }

  virtual StateNodes PredictNodes(Graph& g, std::span<const NodeId> params, const StateNodes& s,
                                  NodeId u) const = 0;

  // Value-level prediction through a scratch graph.
  SystemState Predict(const SystemState& s, const std::array<double, kArmDof>& u) const;
};

// Analytic adapter around the simulator scene: keypoints of theta+u through
// forward kinematics and the camera, recorded as differentiable tape nodes.
class GroundTruthDynamics : public DynamicsModel {
 public:
  explicit GroundTruthDynamics(SceneConfig scene) : scene_(std::move(scene)) {}

  int num_keypoints() const override { return scene_.num_keypoints(); }
  StateNodes PredictNodes(Graph& g, std::span<const NodeId> params, const StateNodes& s,
                          NodeId u) const override;

  const SceneConfig& scene() const { return scene_; }

 private:
  SceneConfig scene_;
};

class LearnedDynamics : public DynamicsModel {
 public:
  explicit LearnedDynamics(MlpParams params) : params_(std::move(params)) {}

  int num_keypoints() const override { return params_.num_keypoints; }
  std::vector<NodeId> BindParams(Graph& g) const override;
  StateNodes PredictNodes(Graph& g, std::span<const NodeId> params, const StateNodes& s,
                          NodeId u) const override;

  const MlpParams& params() const { return params_; }

 private:
  MlpParams params_;
};

// MLP forward pass from already-scaled inputs. wb holds
// (W1, b1, W2, b2, ..., Wn, bn) nodes.
NodeId MlpForward(Graph& g, std::span<const NodeId> wb, NodeId input);

// Records constants for a state and rolls the model out over the action
// nodes. Returned frames include the start state at index 0.
struct RolloutNodes {
  std::vector<StateNodes> frames;
};
StateNodes MakeStateNodes(Graph& g, const SystemState& s, bool as_variable = false);
RolloutNodes RecordRollout(Graph& g, const DynamicsModel& model, std::span<const NodeId> params,
                           const StateNodes& s0, std::span<const NodeId> u_steps);

// Value-level rollout; the trajectory includes s0.
Trajectory RolloutWithModel(const DynamicsModel& model, const SystemState& s0,
                            const std::vector<std::array<double, kArmDof>>& actions);

// Normalized mean squared error: per-dimension MSE divided by the target
// variance, averaged over dimensions. Zero-variance target dimensions are
// excluded and counted.
struct NmseResult {
  double value = 0.0;
  int excluded_dims = 0;
};
NmseResult Nmse(const std::vector<std::vector<double>>& predictions,
                const std::vector<std::vector<double>>& targets);

struct TrainHyperparams {
  int epochs = 150;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double holdout_fraction = 0.1;
  int hidden1 = 100;
  int hidden2 = 25;
  double pixel_scale = 1.0 / 240.0;
  // Augmentation: seeded noise on the keypoint inputs (pixels). Forces the
  // net to trust the exact joint channel, which keeps open-loop rollouts
  // from compounding their own prediction errors.
  double input_kp_noise_px = 0.0;
};

struct TrainReport {
  std::vector<double> train_nmse;    // per epoch
  std::vector<double> holdout_nmse;  // per epoch
  int excluded_dims = 0;
  bool diverged = false;
  int divergence_epoch = -1;
  double pixel_scale = 1.0 / 240.0;

  double final_holdout_nmse() const {
    return holdout_nmse.empty() ? -1.0 : holdout_nmse.back();
  }
};

struct TrainedDynamics {
  MlpParams params;
  TrainReport report;
};

// Mini-batch first-order training of the keypoint predictor against NMSE.
// Deterministic given the seed; aborts early (diverged flag) when the train
// NMSE exceeds 10x its initial value for 3 consecutive epochs.
TrainedDynamics TrainDynamics(const std::vector<Transition>& dataset, const TrainHyperparams& hp,
                              uint64_t seed);

// Binary checkpoint: self-describing header then raw little-endian doubles.
void SaveCheckpoint(const std::string& path, const MlpParams& params);
MlpParams LoadCheckpoint(const std::string& path);

}  // namespace kpirl

#endif  // KPIRL_CORE_DYNAMICS_H_
