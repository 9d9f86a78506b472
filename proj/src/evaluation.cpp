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

#include "rigl/evaluation.hpp"

#include <map>
#include <set>

#include "rigl/profile_init.hpp"

namespace rigl {

std::pair<EventStream, EventStream> split_chronological(const EventStream& stream,
                                                        double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    fail(ErrorKind::kConfig, "train fraction must lie in (0, 1]");
  }
  std::map<std::size_t, std::size_t> total;
  for (const auto& e : stream.events) ++total[e.user];
  std::map<std::size_t, std::size_t> seen;
  EventStream train;
  EventStream test;
  train.traffic = test.traffic = stream.traffic;
  train.zero_traffic = test.zero_traffic = stream.zero_traffic;
  for (const auto& e : stream.events) {
    const std::size_t k = seen[e.user]++;
    if (k < ceil_fraction(train_fraction, total[e.user])) {
      train.events.push_back(e);
    } else {
      test.events.push_back(e);
    }
  }
  return {std::move(train), std::move(test)};
}

PrecisionRecall weighted_precision_recall(
    std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (pairs.empty()) fail(ErrorKind::kInvalidArgument, "no prediction pairs");
  std::map<std::size_t, double> support, predicted, hits;
  for (const auto& [real, pred] : pairs) {
    support[real] += 1.0;
    predicted[pred] += 1.0;
    if (real == pred) hits[real] += 1.0;
  }
  const double n = static_cast<double>(pairs.size());
  PrecisionRecall out;
  for (const auto& [k, s] : support) {
    const double tp = hits.contains(k) ? hits[k] : 0.0;
    const double pk = predicted.contains(k) ? predicted[k] : 0.0;
    if (pk > 0.0) out.precision += (s / n) * (tp / pk);
    out.recall += (s / n) * (tp / s);
  }
  return out;
}

double prec_cat(std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  return weighted_precision_recall(pairs).precision;
}

double rec_cat(std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  return weighted_precision_recall(pairs).recall;
}

double avg_sim(std::span<const std::pair<std::size_t, std::size_t>> category_pairs,
               const CategoryVectors& vectors) {
  if (category_pairs.empty()) fail(ErrorKind::kInvalidArgument, "no prediction pairs");
  double sum = 0.0;
  for (const auto& [a, b] : category_pairs) sum += vectors.cosine(a, b);
  return sum / static_cast<double>(category_pairs.size());
}

double avg_dist(std::span<const std::pair<std::size_t, std::size_t>> poi_pairs,
                const SpatialKG& kg) {
  if (poi_pairs.empty()) fail(ErrorKind::kInvalidArgument, "no prediction pairs");
  double sum = 0.0;
  for (const auto& [a, b] : poi_pairs) sum += poi_distance_km(kg, a, b);
  return sum / static_cast<double>(poi_pairs.size());
}

Policy greedy_policy(const QNetwork& q, StateScaling scaling) {
  return [&q, scaling](const Environment& env, const StreamEvent& e) {
    return greedy_action(q.forward(agent_input(env, e.user, scaling)));
  };
}

Policy oracle_policy() {
  return [](const Environment&, const StreamEvent& e) { return e.poi; };
}

namespace {

struct Accum {
  std::vector<std::pair<std::size_t, std::size_t>> cats;
  std::size_t n = 0;
  double hits = 0.0;
  double sim = 0.0;
  double dist = 0.0;
};

void add(Accum& a, const PredictionPair& p) {
  a.cats.emplace_back(p.real_category, p.pred_category);
  ++a.n;
  a.hits += p.real_poi == p.pred_poi ? 1.0 : 0.0;
  a.sim += p.sim;
  a.dist += p.dist_km;
}

}  // namespace

EvalReport summarize(std::span<const PredictionPair> pairs) {
  if (pairs.empty()) fail(ErrorKind::kState, "evaluation produced no predictions");
  Accum all;
  std::map<std::size_t, Accum> by_user;
  for (const auto& p : pairs) {
    add(all, p);
    add(by_user[p.user], p);
  }
  EvalReport rep;
  const PrecisionRecall pr = weighted_precision_recall(all.cats);
  const double n = static_cast<double>(all.n);
  rep.prec_cat = pr.precision;
  rep.rec_cat = pr.recall;
  rep.avg_sim = all.sim / n;
  rep.avg_dist_km = all.dist / n;
  rep.accuracy = all.hits / n;
  rep.predictions = all.n;
  for (const auto& [user, a] : by_user) {
    const PrecisionRecall upr = weighted_precision_recall(a.cats);
    const double un = static_cast<double>(a.n);
    rep.per_user.push_back(
        {user, a.n, a.hits / un, upr.precision, upr.recall, a.sim / un, a.dist / un});
  }
  return rep;
}

EvalReport evaluate(const Policy& policy, const Environment& env, const EventStream& test,
                    const CategoryVectors& vectors, const std::vector<bool>& known_users,
                    std::vector<PredictionPair>* pairs) {
  if (test.empty()) fail(ErrorKind::kState, "empty test stream");
  Environment local = env;
  const SpatialKG& kg = env.kg();
  std::vector<PredictionPair> collected;
  std::set<std::size_t> skipped_users;
  std::size_t skipped_events = 0;
  for (const auto& e : test.events) {
    if (!known_users.empty() && (e.user >= known_users.size() || !known_users[e.user])) {
      skipped_users.insert(e.user);
      ++skipped_events;
      continue;
    }
    const Mat* traffic = resolve_event(local, test, e);
    if (traffic == nullptr) {
      ++skipped_events;
      continue;
    }
    const std::size_t pred = policy(local, e);
    if (pred >= kg.num_pois()) fail(ErrorKind::kState, "policy returned an unknown POI");
    PredictionPair p;
    p.user = e.user;
    p.time = e.time;
    p.real_poi = e.poi;
    p.pred_poi = pred;
    p.real_category = kg.poi_category[e.poi];
    p.pred_category = kg.poi_category[pred];
    p.sim = vectors.cosine(p.real_category, p.pred_category);
    p.dist_km = poi_distance_km(kg, e.poi, pred);
    collected.push_back(p);
    local.apply_event(e.user, e.poi, *traffic);
  }
  if (!skipped_users.empty()) {
    log_warn("eval_users_skipped", {{"users", static_cast<std::uint64_t>(skipped_users.size())},
                                    {"events", static_cast<std::uint64_t>(skipped_events)}});
  }
  EvalReport rep = summarize(collected);
  rep.skipped_users = skipped_users.size();
  rep.skipped_events = skipped_events;
  if (pairs != nullptr) *pairs = std::move(collected);
  return rep;
}

}  // namespace rigl
