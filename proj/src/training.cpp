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

#include "rigl/training.hpp"

#include <cmath>

namespace rigl {

const Mat& EventStream::traffic_for(const StreamEvent& e) const {
  if (e.context < 0) return zero_traffic;
  const auto i = static_cast<std::size_t>(e.context);
  if (i >= traffic.size()) fail(ErrorKind::kLookup, "event references an unknown time window");
  return traffic[i];
}

double poi_distance_km(const SpatialKG& kg, std::size_t a, std::size_t b) {
  if (a >= kg.num_pois() || b >= kg.num_pois()) fail(ErrorKind::kLookup, "unknown POI index");
  return distance_km({kg.poi_lat[a], kg.poi_lon[a]}, {kg.poi_lat[b], kg.poi_lon[b]});
}

RewardComponents reward_components(const SpatialKG& kg, const CategoryVectors& vectors,
                                   std::size_t real_poi, std::size_t pred_poi) {
  RewardComponents c;
  c.d = r_d_from_km(poi_distance_km(kg, real_poi, pred_poi));
  c.c = r_c(kg.poi_category[real_poi], kg.poi_category[pred_poi], vectors);
  c.p = r_p(real_poi, pred_poi);
  return c;
}

const Mat* resolve_event(const Environment& env, const EventStream& stream,
                         const StreamEvent& e) {
  const char* reason = nullptr;
  if (e.user >= env.num_users()) {
    reason = "unknown user index";
  } else if (e.poi >= env.kg().num_pois()) {
    reason = "unknown POI index";
  } else if (e.context >= static_cast<std::int64_t>(stream.traffic.size())) {
    reason = "unknown time window";
  }
  if (reason == nullptr) return &stream.traffic_for(e);
  log_warn("event_skipped", {{"reason", reason}, {"time", static_cast<std::int64_t>(e.time)}});
  return nullptr;
}

Vec agent_input(const Environment& env, std::size_t user, StateScaling scaling) {
  return scale_state(env.observation(user), scaling);
}

void replay_events(Environment& env, const EventStream& stream) {
  for (const auto& e : stream.events) {
    if (const Mat* traffic = resolve_event(env, stream, e)) env.apply_event(e.user, e.poi, *traffic);
  }
}

CalibrationReport calibrate_baselines(Environment& env, const EventStream& stream,
                                      const CategoryVectors& vectors, const QNetwork& q,
                                      StateScaling scaling, double epsilon, std::size_t rounds,
                                      std::mt19937_64& rng) {
  if (rounds < 4) fail(ErrorKind::kConfig, "calibration needs at least 4 rounds");
  const EnvState snapshot = env.state();
  std::vector<RewardComponents> samples;
  samples.reserve(rounds * stream.size());
  try {
    for (std::size_t round = 0; round < rounds; ++round) {
      env.restore(snapshot);
      for (const auto& e : stream.events) {
        const Mat* traffic = resolve_event(env, stream, e);
        if (traffic == nullptr) continue;
        const std::size_t a = select_action(q.forward(agent_input(env, e.user, scaling)), epsilon, rng);
        samples.push_back(reward_components(env.kg(), vectors, e.poi, a));
        env.apply_event(e.user, e.poi, *traffic);
      }
    }
  } catch (...) {
    env.restore(snapshot);
    throw;
  }
  env.restore(snapshot);
  CalibrationReport rep = baselines_from_samples(samples);
  rep.rounds = rounds;
  return rep;
}

TrainerState Trainer::initial_state(std::size_t input_dim, std::size_t actions,
                                    const AgentConfig& cfg, GateParams gates,
                                    std::uint64_t seed) {
  cfg.validate();
  TrainerState s;
  s.q_e = QNetwork(input_dim, cfg.hidden, actions, seed);
  s.q_t = s.q_e;
  s.gates = std::move(gates);
  s.memory = ReplayMemory(cfg.capacity);
  s.rng.seed(seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

Trainer::Trainer(const SpatialKG& kg, const EnvState& initial, GateParams gates,
                 UpdateStrategy strategy, const EventStream& stream,
                 const CategoryVectors& vectors, TrainingOptions options, std::uint64_t seed)
    : Trainer(kg, initial, strategy, stream, vectors, options,
              initial_state(2 * initial.dim(), kg.num_pois(), options.agent, std::move(gates),
                            seed)) {}

Trainer::Trainer(const SpatialKG& kg, const EnvState& initial, UpdateStrategy strategy,
                 const EventStream& stream, const CategoryVectors& vectors,
                 TrainingOptions options, TrainerState state)
    : kg_(&kg),
      initial_(initial),
      env_(kg, initial, state.gates, strategy),
      stream_(&stream),
      vectors_(&vectors),
      options_(std::move(options)),
      state_(std::move(state)) {
  options_.agent.validate();
  options_.reward.weights.validate();
  if (state_.q_e.input_dim() != 2 * initial.dim() || state_.q_e.output_dim() != kg.num_pois()) {
    fail(ErrorKind::kConfig, "Q-network shape does not match the environment");
  }
  if (vectors.size() != kg.num_categories()) {
    fail(ErrorKind::kConfig, "one category vector per KG category is required");
  }
}

std::uint64_t Trainer::total_steps() const {
  return static_cast<std::uint64_t>(options_.episodes) * stream_->size();
}

void Trainer::run(std::size_t max_episodes) {
  if (stream_->empty()) {
    // Nothing to learn from: the agent stays at its initial weights.
    if (!finished()) log_warn("no_training_events", {});
    state_.episodes_done = options_.episodes;
    return;
  }
  for (std::size_t i = 0; i < max_episodes && !finished(); ++i) run_episode();
}

void Trainer::env_gradient_step(const UpdateTape& prev, std::size_t user, const Vec& raw_obs,
                                const Transition& current) {
  const AgentConfig& cfg = options_.agent;
  const std::size_t d = env_.dim();
  QNetwork::Cache cache;
  const Vec q = state_.q_e.forward(current.state, cache);
  const double y = compute_target(cfg.variant, current.reward,
                                  state_.q_e.forward(current.next_state),
                                  state_.q_t.forward(current.next_state), cfg.gamma);
  const double g = 2.0 * (q(static_cast<Eigen::Index>(current.action)) - y);
  const Vec ds = scale_state_backward(raw_obs, cfg.scaling,
                                      g * state_.q_e.input_gradient(cache, current.action));
  const auto dd = static_cast<Eigen::Index>(d);
  const Vec dg = ds.tail(dd);

  // The KG vectors are not trained, but g is a function of the vectors prev
  // wrote, so the gradient reaches the parameters of that update. The user
  // half depends on prev only when prev moved this user.
  EventCotangent c;
  c.heads[prev.poi] = env_.head_pool_weight() * dg;
  for (const auto& s : prev.siblings) c.heads[s.poi] = env_.head_pool_weight() * dg;
  for (const auto& t : prev.tails) c.tails[t.tail] = env_.tail_pool_weight(t.tail) * dg;
  if (user == prev.user) c.user = ds.head(dd);

  GateParams grad = GateParams::zeros_like(env_.params());
  backward_event(prev, env_.params(), c, grad);
  if (!grad.all_finite()) fail(ErrorKind::kNumeric, "non-finite environment gradient");
  const double norm = std::sqrt(grad.squared_norm());
  const double scale = norm > cfg.env_clip ? cfg.env_clip / norm : 1.0;
  env_.mutable_params().add_scaled(grad, -cfg.env_lr * scale);
}

EpisodeRecord Trainer::run_episode() {
  const AgentConfig& cfg = options_.agent;
  const bool learn_env = cfg.env_lr > 0.0;
  env_.restore(initial_);
  EpisodeRecord rec;
  rec.episode = state_.episodes_done;
  double loss_sum = 0.0;
  double reward_sum = 0.0;
  double hit_sum = 0.0;
  double dist_sum = 0.0;
  UpdateTape tape;
  UpdateTape prev_tape;
  bool have_prev = false;

  for (const auto& ev : stream_->events) {
    const Mat* traffic = resolve_event(env_, *stream_, ev);
    if (traffic == nullptr) {
      have_prev = false;
      continue;
    }
    const Vec raw = env_.observation(ev.user);
    const Vec s = scale_state(raw, cfg.scaling);
    const Vec q = state_.q_e.forward(s);
    const double eps = epsilon_at(cfg, state_.step, total_steps());
    const std::size_t a = select_action(q, eps, state_.rng);
    const RewardComponents comps = reward_components(*kg_, *vectors_, ev.poi, a);
    const RewardSpec& rs = options_.reward;
    const double r = reward(rs.variant, comps, rs.weights, rs.baselines);
    env_.apply_event(ev.user, ev.poi, *traffic, learn_env ? &tape : nullptr);
    Transition t{s, a, r, agent_input(env_, ev.user, cfg.scaling), 0.0};
    if (options_.priority == PriorityKind::kReward) {
      t.priority = priority_reward(t);
    } else {
      t.priority = priority_td(r, cfg.gamma, state_.q_e.forward(t.next_state).maxCoeff(),
                               q(static_cast<Eigen::Index>(a)));
    }
    if (!std::isfinite(t.priority)) fail(ErrorKind::kNumeric, "non-finite replay priority");
    ++state_.step;
    ++rec.steps;
    reward_sum += r;
    hit_sum += comps.p;
    dist_sum += poi_distance_km(*kg_, ev.poi, a);
    if (observer_) observer_({rec.episode, state_.step, &ev, a, r, eps});

    if (learn_env && have_prev) {
      env_gradient_step(prev_tape, ev.user, raw, t);
    }
    state_.memory.push(t);

    if (state_.memory.size() >= cfg.batch && state_.step % cfg.train_every == 0) {
      const std::vector<std::size_t> idx = state_.memory.sample_indices(cfg.batch, state_.rng);
      std::vector<Transition> batch;
      batch.reserve(idx.size());
      for (std::size_t i : idx) batch.push_back(state_.memory.at(i));
      const LossResult res =
          train_step(batch, state_.q_e, state_.q_t, cfg.variant, cfg.gamma, cfg.lr,
                     cfg.grad_clip);
      loss_sum += res.loss;
      ++rec.train_steps;
      if (options_.priority == PriorityKind::kTd) {
        for (std::size_t i : idx) {
          Transition& item = state_.memory.at(i);
          item.priority = priority_td(
              item.reward, cfg.gamma, state_.q_e.forward(item.next_state).maxCoeff(),
              state_.q_e.forward(item.state)(static_cast<Eigen::Index>(item.action)));
        }
      }
    }
    sync_target(state_.q_e, state_.q_t, state_.step, cfg.target_sync);
    if (learn_env) {
      std::swap(prev_tape, tape);
      have_prev = true;
    }
  }

  const double n = std::max<double>(1.0, static_cast<double>(rec.steps));
  rec.mean_loss = rec.train_steps > 0 ? loss_sum / static_cast<double>(rec.train_steps) : 0.0;
  rec.mean_reward = reward_sum / n;
  rec.accuracy = hit_sum / n;
  rec.mean_dist_km = dist_sum / n;
  rec.epsilon = epsilon_at(cfg, state_.step, total_steps());
  state_.gates = env_.params();
  state_.log.push_back(rec);
  ++state_.episodes_done;
  log_info("episode", {{"episode", static_cast<std::uint64_t>(rec.episode)},
                       {"steps", static_cast<std::uint64_t>(rec.steps)},
                       {"loss", rec.mean_loss},
                       {"reward", rec.mean_reward},
                       {"accuracy", rec.accuracy},
                       {"epsilon", rec.epsilon}});
  return rec;
}

}  // namespace rigl
