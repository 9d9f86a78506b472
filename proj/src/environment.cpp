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

#include "rigl/environment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rigl {

GateParams GateParams::random(std::size_t dim, std::size_t cells, std::uint64_t seed) {
  if (dim < 1) fail(ErrorKind::kConfig, "state dimension must be positive");
  if (cells < 1) fail(ErrorKind::kConfig, "grid must have at least one cell");
  const auto d = static_cast<Eigen::Index>(dim);
  const auto in = static_cast<Eigen::Index>(3 * cells);
  std::mt19937_64 rng(seed);
  GateParams p;
  std::normal_distribution<double> gate_dist(0.0, 0.01);
  for (auto& w : p.gate_w) {
    w = Vec(d);
    for (Eigen::Index i = 0; i < d; ++i) w(i) = gate_dist(rng);
  }
  p.gate_b.fill(0.0);
  // x (.) c has about |x| / sqrt(dim) norm for a spread unit context, so unit
  // variance entries keep the candidate on the scale of x.
  std::normal_distribution<double> mix_dist(0.0, 1.0);
  p.user_mix = Mat(d, d);
  p.poi_mix = Mat(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) p.user_mix(i, j) = mix_dist(rng);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) p.poi_mix(i, j) = mix_dist(rng);
  std::normal_distribution<double> ctx_dist(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
  p.context_proj = Mat(d, in);
  for (Eigen::Index j = 0; j < in; ++j)
    for (Eigen::Index i = 0; i < d; ++i) p.context_proj(i, j) = ctx_dist(rng);
  return p;
}

GateParams GateParams::zeros_like(const GateParams& p) {
  GateParams z;
  for (std::size_t k = 0; k < kNumGates; ++k) z.gate_w[k] = Vec::Zero(p.gate_w[k].size());
  z.gate_b.fill(0.0);
  z.user_mix = Mat::Zero(p.user_mix.rows(), p.user_mix.cols());
  z.poi_mix = Mat::Zero(p.poi_mix.rows(), p.poi_mix.cols());
  z.context_proj = Mat::Zero(p.context_proj.rows(), p.context_proj.cols());
  return z;
}

void GateParams::add_scaled(const GateParams& other, double scale) {
  for (std::size_t k = 0; k < kNumGates; ++k) {
    gate_w[k] += scale * other.gate_w[k];
    gate_b[k] += scale * other.gate_b[k];
  }
  user_mix += scale * other.user_mix;
  poi_mix += scale * other.poi_mix;
  context_proj += scale * other.context_proj;
}

double GateParams::squared_norm() const {
  double s = user_mix.squaredNorm() + poi_mix.squaredNorm() + context_proj.squaredNorm();
  for (std::size_t k = 0; k < kNumGates; ++k) s += gate_w[k].squaredNorm() + gate_b[k] * gate_b[k];
  return s;
}

bool GateParams::all_finite() const {
  for (std::size_t k = 0; k < kNumGates; ++k) {
    if (!gate_w[k].allFinite() || !std::isfinite(gate_b[k])) return false;
  }
  return user_mix.allFinite() && poi_mix.allFinite() && context_proj.allFinite();
}

bool operator==(const GateParams& a, const GateParams& b) {
  for (std::size_t k = 0; k < kNumGates; ++k) {
    if (a.gate_w[k].size() != b.gate_w[k].size() || a.gate_w[k] != b.gate_w[k] ||
        a.gate_b[k] != b.gate_b[k]) {
      return false;
    }
  }
  auto same = [](const Mat& x, const Mat& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return same(a.user_mix, b.user_mix) && same(a.poi_mix, b.poi_mix) &&
         same(a.context_proj, b.context_proj);
}

namespace {

Vec flatten_traffic(const Mat& traffic) {
  // row-major: (cell0 inner, in, out, cell1 inner, ...)
  Vec flat(traffic.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < traffic.rows(); ++r)
    for (Eigen::Index c = 0; c < traffic.cols(); ++c) flat(k++) = traffic(r, c);
  return flat;
}

UpdateTape::GateRecord evaluate_gate(const Vec& x, const GateParams& params, GateId id,
                                     UpdateStrategy strategy) {
  UpdateTape::GateRecord g;
  if (strategy == UpdateStrategy::kUp1) return g;
  g.learned = true;
  g.z = params.gate_w[id].dot(x) + params.gate_b[id];
  const double s = sigmoid(g.z);
  g.alpha = std::clamp(s, kGateFloor, 1.0 - kGateFloor);
  g.clamped = g.alpha != s;
  return g;
}

}  // namespace

Vec project_context(const Mat& traffic, const GateParams& params) {
  if (static_cast<std::size_t>(traffic.size()) != params.context_inputs()) {
    fail(ErrorKind::kConfig, "traffic matrix has " + std::to_string(traffic.size()) +
                                 " entries but the context projection expects " +
                                 std::to_string(params.context_inputs()));
  }
  Vec raw = params.context_proj * flatten_traffic(traffic);
  const double n = raw.norm();
  if (n > 0.0) raw /= n;
  return raw;
}

Vec interact(const Vec& x, const Vec& context, const Mat& weight) {
  if (x.size() != context.size() || weight.cols() != x.size()) {
    fail(ErrorKind::kInvalidArgument, "interact: dimension mismatch");
  }
  return weight * x.cwiseProduct(context);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double gate(const Vec& x, const Vec& w, double b) {
  if (x.size() != w.size()) fail(ErrorKind::kInvalidArgument, "gate: dimension mismatch");
  return std::clamp(sigmoid(w.dot(x) + b), kGateFloor, 1.0 - kGateFloor);
}

Vec blend(const Vec& old_value, const Vec& candidate, double alpha) {
  return alpha * old_value + (1.0 - alpha) * candidate;
}

Vec update_user(const Vec& u_old, const Vec& h_visited, const Vec& context, const Mat& user_mix,
                double alpha) {
  return blend(u_old, interact(h_visited, context, user_mix), alpha);
}

Vec update_user(const Vec& u_old, const Vec& h_visited, const Vec& context,
                const GateParams& params) {
  return update_user(u_old, h_visited, context, params.user_mix,
                     gate(u_old, params.gate_w[kGateUser], params.gate_b[kGateUser]));
}

Vec update_visited_poi(const Vec& h_old, const Vec& u_old, const Vec& context,
                       const Mat& poi_mix, double alpha) {
  return blend(h_old, interact(u_old, context, poi_mix), alpha);
}

Vec update_visited_poi(const Vec& h_old, const Vec& u_old, const Vec& context,
                       const GateParams& params) {
  return update_visited_poi(h_old, u_old, context, params.poi_mix,
                            gate(h_old, params.gate_w[kGatePoi], params.gate_b[kGatePoi]));
}

Vec update_tail(const Vec& t_old, const Vec& h_new, const Vec& rel, double alpha) {
  return blend(t_old, h_new + rel, alpha);
}

Vec update_tail(const Vec& t_old, const Vec& h_new, const Vec& rel, const GateParams& params) {
  return update_tail(t_old, h_new, rel,
                     gate(t_old, params.gate_w[kGateTail], params.gate_b[kGateTail]));
}

Vec update_sibling(const Vec& h_old, const Vec& t_new, const Vec& rel, double alpha) {
  return blend(h_old, t_new - rel, alpha);
}

Vec update_sibling(const Vec& h_old, const Vec& t_new, const Vec& rel,
                   const GateParams& params) {
  return update_sibling(h_old, t_new, rel,
                        gate(h_old, params.gate_w[kGateSibling], params.gate_b[kGateSibling]));
}

std::vector<SiblingVisit> sibling_order(const SpatialKG& kg, std::size_t poi) {
  std::vector<SiblingVisit> out;
  for (std::size_t p : kg.category_members[kg.poi_category[poi]]) {
    if (p != poi) out.push_back({p, kBelongTo});
  }
  for (std::size_t p : kg.zone_members[kg.poi_zone[poi]]) {
    if (p != poi) out.push_back({p, kLocateAt});
  }
  return out;
}

Environment::Environment(const SpatialKG& kg, EnvState initial, GateParams params,
                         UpdateStrategy strategy)
    : kg_(&kg), state_(std::move(initial)), params_(std::move(params)), strategy_(strategy) {
  const std::size_t d = state_.dim();
  if (state_.kg.dim() != d || params_.dim() != d) {
    fail(ErrorKind::kConfig, "user, KG and gate dimensions must agree (user=" +
                                 std::to_string(d) + ", kg=" + std::to_string(state_.kg.dim()) +
                                 ", gates=" + std::to_string(params_.dim()) + ")");
  }
  if (static_cast<std::size_t>(state_.kg.heads.cols()) != kg.num_pois() ||
      static_cast<std::size_t>(state_.kg.tails.cols()) != kg.num_tails()) {
    fail(ErrorKind::kInvalidArgument, "KG state does not match the spatial KG");
  }
  reset_sums();
}

void Environment::reset_sums() {
  const auto& s = state_.kg;
  const auto c = static_cast<Eigen::Index>(kg_->num_categories());
  const auto z = static_cast<Eigen::Index>(kg_->num_zones());
  sums_.heads = s.heads.rowwise().sum();
  sums_.categories = s.tails.leftCols(c).rowwise().sum();
  sums_.zones = s.tails.rightCols(z).rowwise().sum();
}

void Environment::restore(const EnvState& snapshot) {
  if (snapshot.users.rows() != state_.users.rows() ||
      snapshot.users.cols() != state_.users.cols() ||
      snapshot.kg.heads.cols() != state_.kg.heads.cols() ||
      snapshot.kg.tails.cols() != state_.kg.tails.cols()) {
    fail(ErrorKind::kInvalidArgument, "snapshot shape does not match the environment");
  }
  state_ = snapshot;
  reset_sums();
}

void Environment::set_head(std::size_t poi, const Vec& value) {
  auto col = state_.kg.heads.col(static_cast<Eigen::Index>(poi));
  sums_.heads += value - col;
  col = value;
}

void Environment::set_tail(std::size_t tail, const Vec& value) {
  auto col = state_.kg.tails.col(static_cast<Eigen::Index>(tail));
  if (tail < kg_->num_categories()) {
    sums_.categories += value - col;
  } else {
    sums_.zones += value - col;
  }
  col = value;
}

void Environment::apply_event(std::size_t user, std::size_t poi, const Mat& traffic,
                              UpdateTape* tape) {
  if (user >= num_users()) {
    fail(ErrorKind::kLookup, "unknown user index " + std::to_string(user));
  }
  if (poi >= kg_->num_pois()) fail(ErrorKind::kLookup, "unknown POI index " + std::to_string(poi));

  UpdateTape local;
  UpdateTape& t = tape != nullptr ? *tape : local;
  t = UpdateTape{};
  t.user = user;
  t.poi = poi;
  if (static_cast<std::size_t>(traffic.size()) != params_.context_inputs()) {
    fail(ErrorKind::kConfig, "traffic matrix does not match the context projection");
  }
  t.traffic_flat = flatten_traffic(traffic);
  t.context_raw = params_.context_proj * t.traffic_flat;
  const double n = t.context_raw.norm();
  t.context = n > 0.0 ? Vec(t.context_raw / n) : t.context_raw;

  const auto ui = static_cast<Eigen::Index>(user);
  const auto pj = static_cast<Eigen::Index>(poi);
  t.u_old = state_.users.col(ui);
  t.h_old = state_.kg.heads.col(pj);

  t.user_gate = evaluate_gate(t.u_old, params_, kGateUser, strategy_);
  t.user_candidate = interact(t.h_old, t.context, params_.user_mix);
  t.u_new = blend(t.u_old, t.user_candidate, t.user_gate.alpha);

  t.poi_gate = evaluate_gate(t.h_old, params_, kGatePoi, strategy_);
  t.poi_candidate = interact(t.u_old, t.context, params_.poi_mix);
  t.h_new = blend(t.h_old, t.poi_candidate, t.poi_gate.alpha);

  state_.users.col(ui) = t.u_new;
  set_head(poi, t.h_new);

  const std::size_t cat_tail = kg_->category_tail(kg_->poi_category[poi]);
  const std::size_t zone_tail = kg_->zone_tail(kg_->poi_zone[poi]);
  for (auto [tail, rel] : {std::pair{cat_tail, kBelongTo}, std::pair{zone_tail, kLocateAt}}) {
    UpdateTape::TailStep step{tail, rel, {}, {}, {}, {}};
    step.t_old = state_.kg.tails.col(static_cast<Eigen::Index>(tail));
    step.gate = evaluate_gate(step.t_old, params_, kGateTail, strategy_);
    step.candidate = t.h_new + state_.kg.relations.col(static_cast<Eigen::Index>(rel));
    step.t_new = blend(step.t_old, step.candidate, step.gate.alpha);
    set_tail(tail, step.t_new);
    t.tails.push_back(std::move(step));
  }

  for (const auto& sib : sibling_order(*kg_, poi)) {
    const std::size_t tail = sib.relation == kBelongTo ? cat_tail : zone_tail;
    UpdateTape::SiblingStep step{sib.poi, tail, sib.relation, {}, {}, {}, {}};
    step.h_before = state_.kg.heads.col(static_cast<Eigen::Index>(sib.poi));
    step.gate = evaluate_gate(step.h_before, params_, kGateSibling, strategy_);
    step.candidate = state_.kg.tails.col(static_cast<Eigen::Index>(tail)) -
                     state_.kg.relations.col(static_cast<Eigen::Index>(sib.relation));
    step.h_after = blend(step.h_before, step.candidate, step.gate.alpha);
    set_head(sib.poi, step.h_after);
    if (tape != nullptr) t.siblings.push_back(std::move(step));
  }
  ++state_.step;
}

Vec Environment::pooled_kg() const {
  const double p = static_cast<double>(kg_->num_pois());
  const double c = static_cast<double>(kg_->num_categories());
  const double z = static_cast<double>(kg_->num_zones());
  Vec out = Vec::Zero(static_cast<Eigen::Index>(dim()));
  if (p + c > 0) out += 0.5 * (sums_.heads + sums_.categories) / (p + c);
  if (p + z > 0) out += 0.5 * (sums_.heads + sums_.zones) / (p + z);
  return out;
}

Vec Environment::observation(std::size_t user) const {
  if (user >= num_users()) fail(ErrorKind::kLookup, "unknown user index");
  Vec obs(2 * static_cast<Eigen::Index>(dim()));
  obs << state_.users.col(static_cast<Eigen::Index>(user)), pooled_kg();
  return obs;
}

double Environment::head_pool_weight() const {
  return category_pool_weight() + zone_pool_weight();
}

double Environment::category_pool_weight() const {
  return 0.5 / static_cast<double>(kg_->num_pois() + kg_->num_categories());
}

double Environment::zone_pool_weight() const {
  return 0.5 / static_cast<double>(kg_->num_pois() + kg_->num_zones());
}

double Environment::tail_pool_weight(std::size_t tail) const {
  return tail < kg_->num_categories() ? category_pool_weight() : zone_pool_weight();
}

namespace {

// Accumulates d(alpha)/d(params) for one gate and returns dL/dx through alpha.
Vec gate_backward(const UpdateTape::GateRecord& g, double d_alpha, const Vec& x, GateId id,
                  const GateParams& params, GateParams& grad) {
  if (!g.learned || g.clamped) return Vec::Zero(x.size());
  const double dz = d_alpha * g.alpha * (1.0 - g.alpha);
  grad.gate_w[id] += dz * x;
  grad.gate_b[id] += dz;
  return dz * params.gate_w[id];
}

}  // namespace

void backward_event(const UpdateTape& tape, const GateParams& params,
                    const EventCotangent& cotangent, GateParams& grad) {
  const auto d = tape.h_old.size();
  std::map<std::size_t, Vec> d_heads = cotangent.heads;
  std::map<std::size_t, Vec> d_tails = cotangent.tails;
  auto grad_of = [&](std::map<std::size_t, Vec>& m, std::size_t k) -> Vec& {
    auto [it, inserted] = m.try_emplace(k, Vec::Zero(d));
    return it->second;
  };

  for (auto it = tape.siblings.rbegin(); it != tape.siblings.rend(); ++it) {
    Vec& d_after = grad_of(d_heads, it->poi);
    const double one_minus = 1.0 - it->gate.alpha;
    // d/d(alpha) of a*h + (1-a)*c is h - c
    const double d_alpha = d_after.dot(it->h_before - it->candidate);
    Vec d_before = it->gate.alpha * d_after;
    d_before += gate_backward(it->gate, d_alpha, it->h_before, kGateSibling, params, grad);
    grad_of(d_tails, it->tail) += one_minus * d_after;
    d_after = d_before;
  }

  Vec d_hnew = Vec::Zero(d);
  if (auto it = d_heads.find(tape.poi); it != d_heads.end()) d_hnew += it->second;
  for (const auto& step : tape.tails) {
    auto it = d_tails.find(step.tail);
    if (it == d_tails.end()) continue;
    const Vec& d_tnew = it->second;
    const double a = step.gate.alpha;
    gate_backward(step.gate, d_tnew.dot(step.t_old - step.candidate), step.t_old, kGateTail,
                  params, grad);
    d_hnew += (1.0 - a) * d_tnew;
  }

  Vec d_context = Vec::Zero(d);
  {
    const double a = tape.poi_gate.alpha;
    gate_backward(tape.poi_gate, d_hnew.dot(tape.h_old - tape.poi_candidate), tape.h_old,
                  kGatePoi, params, grad);
    const Vec d_cand = (1.0 - a) * d_hnew;
    const Vec mixed_in = tape.u_old.cwiseProduct(tape.context);
    grad.poi_mix += d_cand * mixed_in.transpose();
    d_context += (params.poi_mix.transpose() * d_cand).cwiseProduct(tape.u_old);
  }
  if (cotangent.user.size() == d) {
    const double a = tape.user_gate.alpha;
    gate_backward(tape.user_gate, cotangent.user.dot(tape.u_old - tape.user_candidate),
                  tape.u_old, kGateUser, params, grad);
    const Vec d_cand = (1.0 - a) * cotangent.user;
    const Vec mixed_in = tape.h_old.cwiseProduct(tape.context);
    grad.user_mix += d_cand * mixed_in.transpose();
    d_context += (params.user_mix.transpose() * d_cand).cwiseProduct(tape.h_old);
  }

  const double n = tape.context_raw.norm();
  if (n > 0.0) {
    const Vec d_raw = (d_context - tape.context * tape.context.dot(d_context)) / n;
    grad.context_proj += d_raw * tape.traffic_flat.transpose();
  }
}

}  // namespace rigl
