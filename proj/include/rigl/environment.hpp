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

// RL environment state s = (users, KG) and the per-visit state updates.
//
// A visit of user i to POI j at step l runs, in order:
//   1. user      u_i  <- a_u u_i + (1 - a_u) W_u (h_j (.) c)
//   2. POI       h_j  <- a_p h_j + (1 - a_p) W_p (u_i (.) c)      (old u_i)
//   3. tails     t    <- a_t t + (1 - a_t) (h_j' + rel)          (category, zone)
//   4. siblings  h_k  <- a_s h_k + (1 - a_s) (t' - rel)          (category first)
// where c is the projected traffic context and (.) the elementwise product.
// Strategy up2 computes every a_* with a sigmoid gate on the old vector;
// up1 fixes them all at 0.5.

#ifndef RIGL_ENVIRONMENT_HPP_
#define RIGL_ENVIRONMENT_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "rigl/common.hpp"
#include "rigl/spatial_kg.hpp"

namespace rigl {

enum class UpdateStrategy { kUp1, kUp2 };

enum GateId : std::size_t { kGateUser = 0, kGatePoi = 1, kGateTail = 2, kGateSibling = 3 };
inline constexpr std::size_t kNumGates = 4;

inline constexpr double kGateFloor = 1e-6;
inline constexpr double kFixedBlend = 0.5;

struct GateParams {
  std::array<Vec, kNumGates> gate_w;       // each dim
  std::array<double, kNumGates> gate_b{};  //
  Mat user_mix;                            // W_u, dim x dim
  Mat poi_mix;                             // W_p, dim x dim
  Mat context_proj;                        // W_T, dim x (3 * cells)

  std::size_t dim() const { return static_cast<std::size_t>(user_mix.rows()); }
  std::size_t context_inputs() const { return static_cast<std::size_t>(context_proj.cols()); }

  // Gate weights ~ N(0, 0.01^2), biases 0, mixing matrices ~ N(0, 1),
  // context projection ~ N(0, 1/(3 cells)).
  static GateParams random(std::size_t dim, std::size_t cells, std::uint64_t seed);
  static GateParams zeros_like(const GateParams& p);

  void add_scaled(const GateParams& other, double scale);
  double squared_norm() const;
  bool all_finite() const;
  friend bool operator==(const GateParams& a, const GateParams& b);
};

// c = normalize(W_T vec(T)); a zero projection stays zero.
Vec project_context(const Mat& traffic, const GateParams& params);

// W (x (.) c)
Vec interact(const Vec& x, const Vec& context, const Mat& weight);

double sigmoid(double z);
// sigma(w . x + b) clamped to [1e-6, 1 - 1e-6].
double gate(const Vec& x, const Vec& w, double b);

// alpha * old + (1 - alpha) * candidate
Vec blend(const Vec& old_value, const Vec& candidate, double alpha);

Vec update_user(const Vec& u_old, const Vec& h_visited, const Vec& context, const Mat& user_mix,
                double alpha);
Vec update_user(const Vec& u_old, const Vec& h_visited, const Vec& context,
                const GateParams& params);
Vec update_visited_poi(const Vec& h_old, const Vec& u_old, const Vec& context,
                       const Mat& poi_mix, double alpha);
Vec update_visited_poi(const Vec& h_old, const Vec& u_old, const Vec& context,
                       const GateParams& params);
Vec update_tail(const Vec& t_old, const Vec& h_new, const Vec& rel, double alpha);
Vec update_tail(const Vec& t_old, const Vec& h_new, const Vec& rel, const GateParams& params);
Vec update_sibling(const Vec& h_old, const Vec& t_new, const Vec& rel, double alpha);
Vec update_sibling(const Vec& h_old, const Vec& t_new, const Vec& rel,
                   const GateParams& params);

// Siblings of POI j in processing order: POIs sharing j's category (ascending)
// then POIs sharing its zone (ascending). A POI related both ways appears
// twice. j itself never appears.
struct SiblingVisit {
  std::size_t poi;
  Relation relation;
};
std::vector<SiblingVisit> sibling_order(const SpatialKG& kg, std::size_t poi);

struct EnvState {
  Mat users;  // dim x U
  KgState kg;
  std::uint64_t step = 0;

  std::size_t dim() const { return static_cast<std::size_t>(users.rows()); }
  friend bool operator==(const EnvState& a, const EnvState& b) {
    return a.step == b.step && a.users.rows() == b.users.rows() &&
           a.users.cols() == b.users.cols() && a.users == b.users && a.kg == b.kg;
  }
};

// Everything the backward pass needs from one apply_event call.
struct UpdateTape {
  struct GateRecord {
    double z = 0.0;
    double alpha = kFixedBlend;
    bool learned = false;  // false under up1
    bool clamped = false;
  };
  struct TailStep {
    std::size_t tail;
    Relation relation;
    Vec t_old;
    Vec candidate;  // h_new + rel
    Vec t_new;
    GateRecord gate;
  };
  struct SiblingStep {
    std::size_t poi;
    std::size_t tail;
    Relation relation;
    Vec h_before;
    Vec candidate;  // t_new - rel
    Vec h_after;
    GateRecord gate;
  };

  std::size_t user = 0;
  std::size_t poi = 0;
  Vec traffic_flat;
  Vec context_raw;
  Vec context;
  Vec u_old, u_new, user_candidate;
  Vec h_old, h_new, poi_candidate;
  GateRecord user_gate, poi_gate;
  std::vector<TailStep> tails;
  std::vector<SiblingStep> siblings;
};

// Gradient of a loss w.r.t. the post-event values of touched vectors.
struct EventCotangent {
  Vec user;                          // may be empty (no dependence)
  std::map<std::size_t, Vec> heads;  // POI index -> dL/dh
  std::map<std::size_t, Vec> tails;  // tail index -> dL/dt
};

// Backpropagates through one recorded event, treating the pre-event state as
// constant, and accumulates parameter gradients into `grad`.
void backward_event(const UpdateTape& tape, const GateParams& params,
                    const EventCotangent& cotangent, GateParams& grad);

// Running sums for the hierarchical pooling, maintained incrementally.
struct PoolSums {
  Vec heads;
  Vec categories;
  Vec zones;
};

class Environment {
 public:
  Environment(const SpatialKG& kg, EnvState initial, GateParams params,
              UpdateStrategy strategy);

  const SpatialKG& kg() const { return *kg_; }
  const EnvState& state() const { return state_; }
  const GateParams& params() const { return params_; }
  GateParams& mutable_params() { return params_; }
  UpdateStrategy strategy() const { return strategy_; }
  std::size_t dim() const { return state_.dim(); }
  std::size_t num_users() const { return static_cast<std::size_t>(state_.users.cols()); }

  // Replaces the whole state (vectors and step counter).
  void restore(const EnvState& snapshot);

  // Applies the visit (user -> poi) under `traffic` (cells x 3).
  void apply_event(std::size_t user, std::size_t poi, const Mat& traffic,
                   UpdateTape* tape = nullptr);

  // Pooled KG vector from the maintained sums.
  Vec pooled_kg() const;
  // concat(u_user, pooled_kg())
  Vec observation(std::size_t user) const;

  // d(pooled_kg)/d(vector): equal weights for every head, category or zone.
  double head_pool_weight() const;
  double category_pool_weight() const;
  double zone_pool_weight() const;
  double tail_pool_weight(std::size_t tail) const;

 private:
  void reset_sums();
  void set_head(std::size_t poi, const Vec& value);
  void set_tail(std::size_t tail, const Vec& value);

  const SpatialKG* kg_;
  EnvState state_;
  GateParams params_;
  UpdateStrategy strategy_;
  PoolSums sums_;
};

}  // namespace rigl

#endif  // RIGL_ENVIRONMENT_HPP_
