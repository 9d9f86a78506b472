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

// Event stream, reward evaluation against the true visit, baseline
// calibration and the replay-driven training loop.

#ifndef RIGL_TRAINING_HPP_
#define RIGL_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rigl/agent.hpp"
#include "rigl/environment.hpp"
#include "rigl/ingest.hpp"
#include "rigl/replay.hpp"
#include "rigl/reward.hpp"

namespace rigl {

struct StreamEvent {
  std::size_t user = 0;
  std::size_t poi = 0;
  std::int64_t context = -1;  // index into EventStream::traffic, -1 for none
  Timestamp time = 0;
};

struct EventStream {
  std::vector<StreamEvent> events;  // global time order
  std::vector<Mat> traffic;         // cells x 3 each
  Mat zero_traffic;

  const Mat& traffic_for(const StreamEvent& e) const;
  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

RewardComponents reward_components(const SpatialKG& kg, const CategoryVectors& vectors,
                                   std::size_t real_poi, std::size_t pred_poi);
double poi_distance_km(const SpatialKG& kg, std::size_t a, std::size_t b);

struct RewardSpec {
  RewardVariant variant = RewardVariant::kR2;
  RewardWeights weights;
  RewardBaselines baselines;
};

// Traffic for `e`, or nullptr (with a warning) when the event names an
// unknown user, POI or time window. Such events are skipped everywhere.
const Mat* resolve_event(const Environment& env, const EventStream& stream, const StreamEvent& e);

// The network input for `user`: the scaled observation.
Vec agent_input(const Environment& env, std::size_t user, StateScaling scaling);

// Applies the true visits of `stream` in order.
void replay_events(Environment& env, const EventStream& stream);

// Runs `rounds` passes of the epsilon-greedy policy over `stream`, starting
// each pass from the current environment state, collects (r_d, r_c, r_p) per
// step and restores the environment afterwards.
CalibrationReport calibrate_baselines(Environment& env, const EventStream& stream,
                                      const CategoryVectors& vectors, const QNetwork& q,
                                      StateScaling scaling, double epsilon, std::size_t rounds,
                                      std::mt19937_64& rng);

struct TrainingOptions {
  AgentConfig agent;
  PriorityKind priority = PriorityKind::kTd;
  RewardSpec reward;
  std::size_t episodes = 1;
};

struct EpisodeRecord {
  std::size_t episode = 0;
  std::size_t steps = 0;
  std::size_t train_steps = 0;
  double mean_loss = 0.0;
  double mean_reward = 0.0;
  double accuracy = 0.0;
  double mean_dist_km = 0.0;
  double epsilon = 0.0;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct StepRecord {
  std::size_t episode;
  std::uint64_t step;
  const StreamEvent* event;
  std::size_t action;
  double reward;
  double epsilon;
};

// Everything the loop mutates; enough to resume bit-exactly.
struct TrainerState {
  QNetwork q_e;
  QNetwork q_t;
  GateParams gates;
  ReplayMemory memory{1};
  std::mt19937_64 rng;
  std::uint64_t step = 0;
  std::size_t episodes_done = 0;
  std::vector<EpisodeRecord> log;
};

class Trainer {
 public:
  // Fresh state: Q_e from seed, Q_t a copy of it.
  Trainer(const SpatialKG& kg, const EnvState& initial, GateParams gates,
          UpdateStrategy strategy, const EventStream& stream, const CategoryVectors& vectors,
          TrainingOptions options, std::uint64_t seed);
  Trainer(const SpatialKG& kg, const EnvState& initial, UpdateStrategy strategy,
          const EventStream& stream, const CategoryVectors& vectors, TrainingOptions options,
          TrainerState state);

  static TrainerState initial_state(std::size_t input_dim, std::size_t actions,
                                    const AgentConfig& cfg, GateParams gates, std::uint64_t seed);

  // Runs up to `max_episodes` more episodes, stopping at options.episodes.
  void run(std::size_t max_episodes = static_cast<std::size_t>(-1));
  EpisodeRecord run_episode();

  bool finished() const { return state_.episodes_done >= options_.episodes; }
  std::uint64_t total_steps() const;
  const TrainerState& state() const { return state_; }
  const TrainingOptions& options() const { return options_; }
  Environment& environment() { return env_; }

  void set_observer(std::function<void(const StepRecord&)> fn) { observer_ = std::move(fn); }

 private:
  void env_gradient_step(const UpdateTape& prev, std::size_t user, const Vec& raw_obs,
                         const Transition& current);

  const SpatialKG* kg_;
  EnvState initial_;
  Environment env_;
  const EventStream* stream_;
  const CategoryVectors* vectors_;
  TrainingOptions options_;
  TrainerState state_;
  std::function<void(const StepRecord&)> observer_;
};

}  // namespace rigl

#endif  // RIGL_TRAINING_HPP_
