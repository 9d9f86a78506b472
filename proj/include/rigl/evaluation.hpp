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

#ifndef RIGL_EVALUATION_HPP_
#define RIGL_EVALUATION_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rigl/agent.hpp"
#include "rigl/environment.hpp"
#include "rigl/reward.hpp"
#include "rigl/training.hpp"

namespace rigl {

// Per user, the first ceil(train_fraction * n) events train and the rest
// test; both shards keep global time order and share the traffic table.
std::pair<EventStream, EventStream> split_chronological(const EventStream& stream,
                                                        double train_fraction = 0.9);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Support-weighted one-vs-rest precision and recall over (real, predicted)
// labels. A class with no predictions contributes precision 0.
PrecisionRecall weighted_precision_recall(
    std::span<const std::pair<std::size_t, std::size_t>> pairs);
double prec_cat(std::span<const std::pair<std::size_t, std::size_t>> pairs);
double rec_cat(std::span<const std::pair<std::size_t, std::size_t>> pairs);

double avg_sim(std::span<const std::pair<std::size_t, std::size_t>> category_pairs,
               const CategoryVectors& vectors);
double avg_dist(std::span<const std::pair<std::size_t, std::size_t>> poi_pairs,
                const SpatialKG& kg);

struct PredictionPair {
  std::size_t user = 0;
  Timestamp time = 0;
  std::size_t real_poi = 0;
  std::size_t pred_poi = 0;
  std::size_t real_category = 0;
  std::size_t pred_category = 0;
  double sim = 0.0;
  double dist_km = 0.0;
};

struct UserMetrics {
  std::size_t user = 0;
  std::size_t predictions = 0;
  double accuracy = 0.0;
  double prec_cat = 0.0;
  double rec_cat = 0.0;
  double avg_sim = 0.0;
  double avg_dist_km = 0.0;
};

struct EvalReport {
  double prec_cat = 0.0;
  double rec_cat = 0.0;
  double avg_sim = 0.0;
  double avg_dist_km = 0.0;
  double accuracy = 0.0;  // mean r_p
  std::size_t predictions = 0;
  std::size_t skipped_users = 0;
  std::size_t skipped_events = 0;
  std::vector<UserMetrics> per_user;
  std::string fingerprint;
};

// Chooses a POI for the event about to happen, given the current state.
using Policy = std::function<std::size_t(const Environment& env, const StreamEvent& event)>;

Policy greedy_policy(const QNetwork& q, StateScaling scaling);
// Always answers the true POI.
Policy oracle_policy();

// Metrics over already collected pairs.
EvalReport summarize(std::span<const PredictionPair> pairs);

// Greedy rollout on a private copy of `env`: predict, then apply the true
// event. Events of users outside `known_users` (when non-empty) are skipped.
EvalReport evaluate(const Policy& policy, const Environment& env, const EventStream& test,
                    const CategoryVectors& vectors, const std::vector<bool>& known_users = {},
                    std::vector<PredictionPair>* pairs = nullptr);

}  // namespace rigl

#endif  // RIGL_EVALUATION_HPP_
