// Copyright 2026 The RIGL Authors.
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

#ifndef RIGL_AGENT_HPP_
#define RIGL_AGENT_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "rigl/common.hpp"
#include "rigl/replay.hpp"
#include "rigl/spatial_kg.hpp"

namespace rigl {

// Brute-force hierarchical pooling: average of the belong_to graph nodes
// (POIs and categories) and of the locate_at graph nodes (POIs and zones),
// then the mean of the two. An empty graph contributes a zero vector.
Vec pool_kg(const KgState& state, const SpatialKG& kg);

struct DenseLayer {
  Mat w;  // out x in
  Vec b;
};

// Fully connected, ReLU between layers, linear output.
class QNetwork {
 public:
  struct Cache {
    std::vector<Vec> inputs;  // input of each layer
    std::vector<Vec> pre;     // pre-activation of each layer
  };

  QNetwork() = default;
  // He-normal weights, zero biases.
  QNetwork(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output,
           std::uint64_t seed);
  explicit QNetwork(std::vector<DenseLayer> layers);
  static QNetwork zeros_like(const QNetwork& net);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_parameters() const;
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Vec forward(const Vec& x) const;
  Vec forward(const Vec& x, Cache& cache) const;

  // Accumulates parameter gradients for upstream d_out; returns dL/dx.
  Vec backward(const Cache& cache, const Vec& d_out, QNetwork& grad) const;
  // d(Q[action])/dx for the cached input.
  Vec input_gradient(const Cache& cache, std::size_t action) const;

  void add_scaled(const QNetwork& other, double scale);
  bool all_finite() const;
  friend bool operator==(const QNetwork& a, const QNetwork& b);

 private:
  std::vector<DenseLayer> layers_;
};

// Gradient whose output layer is stored only for the touched actions.
class SparseQGradient {
 public:
  explicit SparseQGradient(const QNetwork& like);

  // Backpropagates g * d(Q[action])/d(params); returns dL/dx.
  Vec accumulate(const QNetwork& net, const QNetwork::Cache& cache, std::size_t action, double g);
  void apply(QNetwork& net, double scale) const;
  double squared_norm() const;
  QNetwork to_dense(const QNetwork& like) const;

 private:
  std::vector<DenseLayer> hidden_;
  std::map<std::size_t, std::pair<Vec, double>> out_rows_;
};

// Optional rescaling of the observation concat(u, g) before the network:
// block-L2 scales u and g to unit norm separately (zero blocks stay zero).
enum class StateScaling { kNone, kBlockL2 };

Vec scale_state(const Vec& obs, StateScaling scaling);
// Maps d(loss)/d(scaled) back to d(loss)/d(obs).
Vec scale_state_backward(const Vec& obs, StateScaling scaling, const Vec& d_scaled);

// argmax with ties to the lowest index.
std::size_t greedy_action(const Vec& q);

// Always draws one uniform; below epsilon a second uniform draw picks the POI.
std::size_t select_action(const Vec& q, double epsilon, std::mt19937_64& rng);

enum class PolicyVariant { kDqn, kDdqn };

// dqn: r + gamma max Q_t(s'); ddqn: r + gamma Q_t(s', argmax Q_e(s')).
double compute_target(PolicyVariant variant, double reward, const Vec& q_e_next,
                      const Vec& q_t_next, double gamma);

struct AgentConfig {
  PolicyVariant variant = PolicyVariant::kDdqn;
  double gamma = 0.9;
  double lr = 1e-5;
  double env_lr = 1e-5;
  double env_clip = 1.0;  // max global norm of one environment gradient
  double grad_clip = 10.0;  // max global norm of one Q-network gradient; 0 disables
  std::vector<std::size_t> hidden{256, 128};
  StateScaling scaling = StateScaling::kBlockL2;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.5;
  std::size_t target_sync = 100;
  std::size_t train_every = 1;
  std::size_t batch = 32;
  std::size_t capacity = 50000;

  void validate() const;
};

// Linear anneal from eps_start to eps_end over eps_fraction of total_steps.
double epsilon_at(const AgentConfig& cfg, std::uint64_t step, std::uint64_t total_steps);

struct LossResult {
  double loss = 0.0;
  std::vector<double> targets;
  std::vector<double> predictions;
};

// Mean of (Q_e(s)[a] - y)^2 with y from compute_target; the gradient of that
// mean w.r.t. Q_e goes into grad when given.
LossResult td_loss(std::span<const Transition> batch, const QNetwork& q_e, const QNetwork& q_t,
                   PolicyVariant variant, double gamma, SparseQGradient* grad = nullptr);

// One SGD step on Q_e; throws kNumeric (with a diagnostic) on a non-finite loss.
// A gradient whose global norm exceeds clip > 0 is rescaled to norm clip.
LossResult train_step(std::span<const Transition> batch, QNetwork& q_e, const QNetwork& q_t,
                      PolicyVariant variant, double gamma, double lr, double clip = 0.0);

// Q_t <- Q_e when step is a positive multiple of K.
bool sync_target(const QNetwork& q_e, QNetwork& q_t, std::uint64_t step, std::size_t k);

}  // namespace rigl

#endif  // RIGL_AGENT_HPP_
