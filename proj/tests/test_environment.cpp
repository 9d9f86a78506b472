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

#include <doctest.h>

#include <random>

#include "grad_check.hpp"
#include "rigl/agent.hpp"
#include "rigl/environment.hpp"
#include "test_util.hpp"

using namespace rigl;
using test::checkin;

namespace {

struct World {
  SpatialKG kg;
  EnvState state;
  GateParams params;
};

// 10 POIs over 3 categories and a 2x2 grid, 3 users, random vectors.
World make_world(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, 1.0);
  std::vector<CheckinEvent> ev;
  for (int p = 0; p < 10; ++p) {
    ev.push_back(checkin("u", "p" + std::to_string(p), "c" + std::to_string(p % 3), coord(rng),
                         coord(rng), p));
  }
  World w;
  w.kg = build_spatial_kg(ev, GridSpec{0, 1, 0, 1, 2, 2});
  w.state.users = test::random_mat(dim, 3, rng);
  w.state.kg.heads = test::random_mat(dim, w.kg.num_pois(), rng);
  w.state.kg.tails = test::random_mat(dim, w.kg.num_tails(), rng);
  w.state.kg.relations = test::random_mat(dim, 2, rng);
  w.params = GateParams::random(dim, 4, seed + 1);
  for (auto& w_k : w.params.gate_w) w_k = test::random_vec(dim, rng, 0.5);
  for (auto& b : w.params.gate_b) b = std::normal_distribution<double>(0.0, 0.5)(rng);
  return w;
}

Mat random_traffic(std::size_t cells, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(0, 5);
  Mat t(static_cast<Eigen::Index>(cells), 3);
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = n(rng);
  return t;
}

void check_between(const Vec& out, const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    CHECK(out(i) >= std::min(a(i), b(i)));
    CHECK(out(i) <= std::max(a(i), b(i)));
  }
}

}  // namespace

TEST_SUITE("environment") {

TEST_CASE("context projection") {
  GateParams p = GateParams::random(4, 1, 1);
  CHECK(project_context(Mat::Zero(1, 3), p).isZero());

  p.context_proj = Mat::Zero(4, 3);
  p.context_proj.topLeftCorner(3, 3).setIdentity();
  Mat t(1, 3);
  t << 3, 0, 4;
  Vec c = project_context(t, p);
  Vec expect(4);
  expect << 0.6, 0.0, 0.8, 0.0;
  CHECK((c - expect).norm() < 1e-15);

  std::mt19937_64 rng(3);
  GateParams q = GateParams::random(5, 4, 2);
  for (int i = 0; i < 50; ++i) {
    const double n = project_context(random_traffic(4, rng), q).norm();
    CHECK((n == 0.0 || std::abs(n - 1.0) < 1e-12));
  }
  CHECK_THROWS_AS(project_context(Mat::Zero(2, 3), q), Error);
}

TEST_CASE("interaction term") {
  std::mt19937_64 rng(4);
  const Vec x = test::random_vec(4, rng);
  CHECK(interact(x, Vec::Zero(4), test::random_mat(4, 4, rng)).isZero());
  CHECK(interact(x, Vec::Ones(4), Mat::Identity(4, 4)) == x);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec h = test::random_vec(5, rng), c = test::random_vec(5, rng);
    const Mat w = test::random_mat(5, 5, rng);
    const Vec got = interact(h, c, w);
    for (int i = 0; i < 5; ++i) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += w(i, k) * h(k) * c(k);
      CHECK(std::abs(got(i) - s) < 1e-12);
    }
  }
}

TEST_CASE("gate values and clamp") {
  std::mt19937_64 rng(5);
  const Vec x = test::random_vec(3, rng);
  CHECK(gate(x, Vec::Zero(3), 0.0) == 0.5);
  CHECK(gate(x, Vec::Zero(3), 20.0) == 1.0 - 1e-6);
  CHECK(gate(x, Vec::Zero(3), -40.0) == 1e-6);
  for (int rep = 0; rep < 100; ++rep) {
    const Vec w = test::random_vec(3, rng), v = test::random_vec(3, rng);
    const double b = std::normal_distribution<double>(0, 2)(rng);
    const double a = gate(v, w, b);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    CHECK(a == doctest::Approx(1.0 / (1.0 + std::exp(-(w.dot(v) + b)))).epsilon(1e-12));
  }
}

TEST_CASE("user update special cases") {
  std::mt19937_64 rng(6);
  const Vec u = test::random_vec(4, rng), h = test::random_vec(4, rng);
  const Vec c = test::random_vec(4, rng).normalized();
  const Mat w = test::random_mat(4, 4, rng);
  CHECK(update_user(u, h, c, w, 1.0) == u);
  CHECK(update_user(u, h, Vec::Zero(4), w, 0.5) == 0.5 * u);
  GateParams p = GateParams::random(4, 1, 3);
  p.gate_b[kGateUser] = 20.0;
  CHECK((update_user(u, h, c, p) - u).norm() <= 1e-5 * (1.0 + u.norm()));
  for (int rep = 0; rep < 50; ++rep) {
    const double a = std::uniform_real_distribution<double>(0, 1)(rng);
    check_between(update_user(u, h, c, w, a), u, interact(h, c, w));
  }
}

TEST_CASE("visited POI update special cases") {
  std::mt19937_64 rng(7);
  const Vec h = test::random_vec(4, rng), u = test::random_vec(4, rng);
  const Vec c = test::random_vec(4, rng).normalized();
  const Mat w = test::random_mat(4, 4, rng);
  CHECK(update_visited_poi(h, u, c, w, 1.0) == h);
  CHECK(update_visited_poi(h, u, Vec::Zero(4), w, 0.5) == 0.5 * h);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = std::uniform_real_distribution<double>(0, 1)(rng);
    check_between(update_visited_poi(h, u, c, w, a), h, interact(u, c, w));
  }
}

TEST_CASE("tail and sibling updates") {
  std::mt19937_64 rng(8);
  const Vec t = test::random_vec(4, rng), h = test::random_vec(4, rng);
  const Vec r = test::random_vec(4, rng);
  CHECK(update_tail(t, h, r, 1.0) == t);
  CHECK(update_tail(t, h, r, 0.0) == h + r);
  CHECK(update_sibling(h, t, r, 1.0) == h);
  CHECK(update_sibling(h, t, r, 0.0) == t - r);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = std::uniform_real_distribution<double>(0, 1)(rng);
    check_between(update_tail(t, h, r, a), t, h + r);
    check_between(update_sibling(h, t, r, a), h, t - r);
  }
}

TEST_CASE("sibling order") {
  const CheckinEvent ev[] = {checkin("u", "p0", "A", 0.1, 0.1, 1),
                             checkin("u", "p1", "A", 0.1, 0.2, 2),
                             checkin("u", "p2", "A", 0.9, 0.9, 3),
                             checkin("u", "p3", "B", 0.95, 0.95, 4)};
  auto kg = build_spatial_kg(ev, GridSpec{0, 1, 0, 1, 2, 2});
  auto s = sibling_order(kg, kg.poi_index("p0"));
  REQUIRE(s.size() == 3);
  CHECK(s[0].poi == kg.poi_index("p1"));
  CHECK(s[0].relation == kBelongTo);
  CHECK(s[1].poi == kg.poi_index("p2"));
  CHECK(s[2].poi == kg.poi_index("p1"));
  CHECK(s[2].relation == kLocateAt);

  const CheckinEvent lone[] = {checkin("u", "a", "A", 0.1, 0.1, 1),
                               checkin("u", "b", "B", 0.9, 0.9, 2)};
  auto kg2 = build_spatial_kg(lone, GridSpec{0, 1, 0, 1, 2, 2});
  CHECK(sibling_order(kg2, 0).empty());
}

TEST_CASE("hand-stepped event on a three-POI KG") {
  const CheckinEvent ev[] = {checkin("u", "p0", "A", 0.1, 0.1, 1),
                             checkin("u", "p1", "A", 0.1, 0.2, 2),
                             checkin("u", "p2", "A", 0.9, 0.9, 3)};
  auto kg = build_spatial_kg(ev, GridSpec{0, 1, 0, 1, 2, 2});
  std::mt19937_64 rng(10);
  const std::size_t d = 4;
  EnvState s{test::random_mat(d, 1, rng),
             KgState{test::random_mat(d, 3, rng), test::random_mat(d, kg.num_tails(), rng),
                     test::random_mat(d, 2, rng)},
             0};
  GateParams p = GateParams::random(d, 4, 11);
  for (auto& w : p.gate_w) w = test::random_vec(d, rng, 0.5);
  Mat traffic = random_traffic(4, rng);

  Environment env(kg, s, p, UpdateStrategy::kUp2);
  env.apply_event(0, 0, traffic);

  const Vec c = project_context(traffic, p);
  const Vec r_bt = s.kg.relations.col(kBelongTo), r_la = s.kg.relations.col(kLocateAt);
  const Vec u1 = update_user(s.users.col(0), s.kg.heads.col(0), c, p);
  const Vec h0 = update_visited_poi(s.kg.heads.col(0), s.users.col(0), c, p);
  const std::size_t cat = kg.category_tail(kg.poi_category[0]);
  const std::size_t zone = kg.zone_tail(kg.poi_zone[0]);
  const Vec tc = update_tail(s.kg.tails.col(static_cast<Eigen::Index>(cat)), h0, r_bt, p);
  const Vec tz = update_tail(s.kg.tails.col(static_cast<Eigen::Index>(zone)), h0, r_la, p);
  Vec h1 = update_sibling(s.kg.heads.col(1), tc, r_bt, p);
  const Vec h2 = update_sibling(s.kg.heads.col(2), tc, r_bt, p);
  h1 = update_sibling(h1, tz, r_la, p);

  const auto& out = env.state();
  CHECK((out.users.col(0) - u1).norm() < 1e-12);
  CHECK((out.kg.heads.col(0) - h0).norm() < 1e-12);
  CHECK((out.kg.heads.col(1) - h1).norm() < 1e-12);
  CHECK((out.kg.heads.col(2) - h2).norm() < 1e-12);
  CHECK((out.kg.tails.col(static_cast<Eigen::Index>(cat)) - tc).norm() < 1e-12);
  CHECK((out.kg.tails.col(static_cast<Eigen::Index>(zone)) - tz).norm() < 1e-12);
  CHECK(out.kg.relations == s.kg.relations);
  CHECK(out.step == 1);
}

TEST_CASE("up1 with zero context follows the fixed-blend formulas") {
  auto w = make_world(5, 21);
  Environment env(w.kg, w.state, w.params, UpdateStrategy::kUp1);
  const std::size_t poi = 4;
  env.apply_event(1, poi, Mat::Zero(4, 3));
  const auto& s0 = w.state;
  const auto& s1 = env.state();
  CHECK((s1.users.col(1) - 0.5 * s0.users.col(1)).norm() < 1e-12);
  const Vec h = 0.5 * s0.kg.heads.col(poi);
  CHECK((s1.kg.heads.col(poi) - h).norm() < 1e-12);
  const std::size_t cat = w.kg.category_tail(w.kg.poi_category[poi]);
  const std::size_t zone = w.kg.zone_tail(w.kg.poi_zone[poi]);
  const Vec tc = 0.5 * s0.kg.tails.col(cat) + 0.5 * (h + s0.kg.relations.col(kBelongTo));
  const Vec tz = 0.5 * s0.kg.tails.col(zone) + 0.5 * (h + s0.kg.relations.col(kLocateAt));
  CHECK((s1.kg.tails.col(cat) - tc).norm() < 1e-12);
  CHECK((s1.kg.tails.col(zone) - tz).norm() < 1e-12);
  Mat heads = s0.kg.heads;
  heads.col(poi) = h;
  for (const auto& sib : sibling_order(w.kg, poi)) {
    const Vec& t = sib.relation == kBelongTo ? tc : tz;
    heads.col(sib.poi) = 0.5 * heads.col(sib.poi) + 0.5 * (t - s0.kg.relations.col(sib.relation));
  }
  CHECK((s1.kg.heads - heads).norm() < 1e-12);
}

TEST_CASE("saturated gates leave the state in place") {
  auto w = make_world(4, 22);
  for (auto& b : w.params.gate_b) b = 20.0;
  for (auto& g : w.params.gate_w) g.setZero();
  Environment env(w.kg, w.state, w.params, UpdateStrategy::kUp2);
  std::mt19937_64 rng(1);
  env.apply_event(0, 2, random_traffic(4, rng));
  const auto& s = env.state();
  CHECK(s.step == 1);
  CHECK((s.users - w.state.users).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((s.kg.heads - w.state.kg.heads).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((s.kg.tails - w.state.kg.tails).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("the state genuinely evolves") {
  auto w = make_world(4, 23);
  std::mt19937_64 rng(2);
  const Mat traffic = random_traffic(4, rng);
  Environment once(w.kg, w.state, w.params, UpdateStrategy::kUp2);
  once.apply_event(0, 3, traffic);
  Environment twice = once;
  twice.apply_event(0, 3, traffic);
  CHECK_FALSE(once.state().users == twice.state().users);
  CHECK_FALSE(once.state().kg.heads == twice.state().kg.heads);
}

TEST_CASE("random events: convexity, gate bounds, locality") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    auto w = make_world(4, 100 + rep);
    const auto strategy = rep % 2 ? UpdateStrategy::kUp1 : UpdateStrategy::kUp2;
    Environment env(w.kg, w.state, w.params, strategy);
    const std::size_t user = rep % 3, poi = rep % 10;
    UpdateTape tape;
    env.apply_event(user, poi, random_traffic(4, rng), &tape);
    const auto& s = env.state();

    check_between(tape.u_new, tape.u_old, tape.user_candidate);
    check_between(tape.h_new, tape.h_old, tape.poi_candidate);
    for (const auto& t : tape.tails) check_between(t.t_new, t.t_old, t.candidate);
    for (const auto& t : tape.siblings) check_between(t.h_after, t.h_before, t.candidate);
    for (const auto* g : {&tape.user_gate, &tape.poi_gate}) {
      CHECK(g->alpha >= kGateFloor);
      CHECK(g->alpha <= 1.0 - kGateFloor);
    }

    std::vector<bool> touched(w.kg.num_pois(), false);
    touched[poi] = true;
    for (const auto& sib : sibling_order(w.kg, poi)) touched[sib.poi] = true;
    for (std::size_t p = 0; p < w.kg.num_pois(); ++p) {
      if (!touched[p]) CHECK(s.kg.heads.col(p) == w.state.kg.heads.col(p));
    }
    for (std::size_t u = 0; u < 3; ++u) {
      if (u != user) CHECK(s.users.col(u) == w.state.users.col(u));
    }
    const std::size_t cat = w.kg.category_tail(w.kg.poi_category[poi]);
    const std::size_t zone = w.kg.zone_tail(w.kg.poi_zone[poi]);
    for (std::size_t t = 0; t < w.kg.num_tails(); ++t) {
      if (t != cat && t != zone) CHECK(s.kg.tails.col(t) == w.state.kg.tails.col(t));
    }
    CHECK(s.kg.relations == w.state.kg.relations);
    CHECK(s.users.allFinite());
    CHECK(s.kg.heads.allFinite());
  }
}

TEST_CASE("incremental pooling equals the brute-force mean") {
  auto w = make_world(6, 40);
  Environment env(w.kg, w.state, w.params, UpdateStrategy::kUp2);
  std::mt19937_64 rng(41);
  for (int i = 0; i < 50; ++i) {
    env.apply_event(i % 3, (7 * i) % 10, random_traffic(4, rng));
    const Vec expect = pool_kg(env.state().kg, w.kg);
    CHECK((env.pooled_kg() - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Vec obs = env.observation(2);
  CHECK(obs.head(6) == env.state().users.col(2));
  CHECK(obs.tail(6) == env.pooled_kg());
}

TEST_CASE("restore returns the exact snapshot") {
  auto w = make_world(4, 50);
  Environment env(w.kg, w.state, w.params, UpdateStrategy::kUp2);
  const Vec g0 = env.pooled_kg();
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5; ++i) env.apply_event(0, i, random_traffic(4, rng));
  env.restore(w.state);
  CHECK(env.state() == w.state);
  CHECK((env.pooled_kg() - g0).norm() < 1e-12);
}

TEST_CASE("errors") {
  auto w = make_world(4, 60);
  Environment env(w.kg, w.state, w.params, UpdateStrategy::kUp2);
  CHECK_THROWS_AS(env.apply_event(3, 0, Mat::Zero(4, 3)), Error);
  CHECK_THROWS_AS(env.apply_event(0, 10, Mat::Zero(4, 3)), Error);
  CHECK_THROWS_AS(env.apply_event(0, 0, Mat::Zero(3, 3)), Error);
  GateParams wrong = GateParams::random(5, 4, 1);
  CHECK_THROWS_AS(Environment(w.kg, w.state, wrong, UpdateStrategy::kUp2), Error);
}

TEST_CASE("event backward pass matches finite differences") {
  std::mt19937_64 rng(70);
  for (int rep = 0; rep < 5; ++rep) {
    auto w = make_world(3, 200 + rep);
    const Mat traffic = random_traffic(4, rng) + Mat::Ones(4, 3);
    const std::size_t poi = rep % 10, user = rep % 3;
    const auto strategy = rep == 4 ? UpdateStrategy::kUp1 : UpdateStrategy::kUp2;

    EventCotangent cot;
    cot.user = test::random_vec(3, rng);
    cot.heads[poi] = test::random_vec(3, rng);
    for (const auto& sib : sibling_order(w.kg, poi)) cot.heads[sib.poi] = test::random_vec(3, rng);
    cot.tails[w.kg.category_tail(w.kg.poi_category[poi])] = test::random_vec(3, rng);
    cot.tails[w.kg.zone_tail(w.kg.poi_zone[poi])] = test::random_vec(3, rng);

    GateParams params = w.params;
    auto loss = [&] {
      Environment env(w.kg, w.state, params, strategy);
      env.apply_event(user, poi, traffic);
      const auto& s = env.state();
      double l = cot.user.dot(s.users.col(user));
      for (const auto& [p, g] : cot.heads) l += g.dot(s.kg.heads.col(p));
      for (const auto& [t, g] : cot.tails) l += g.dot(s.kg.tails.col(t));
      return l;
    };
    Environment env(w.kg, w.state, params, strategy);
    UpdateTape tape;
    env.apply_event(user, poi, traffic, &tape);
    GateParams grad = GateParams::zeros_like(params);
    backward_event(tape, params, cot, grad);

    std::vector<Mat*> ptrs{&params.user_mix, &params.poi_mix, &params.context_proj};
    std::vector<const Mat*> analytic{&grad.user_mix, &grad.poi_mix, &grad.context_proj};
    auto numeric = test::numeric_gradient(ptrs, loss);
    auto flat = test::flatten(analytic);
    CHECK(test::relative_error(flat, numeric) <= 1e-4);

    if (strategy == UpdateStrategy::kUp2) {
      for (std::size_t k = 0; k < kNumGates; ++k) {
        for (Eigen::Index i = 0; i < params.gate_w[k].size(); ++i) {
          const double keep = params.gate_w[k](i);
          params.gate_w[k](i) = keep + test::kFdStep;
          const double up = loss();
          params.gate_w[k](i) = keep - test::kFdStep;
          const double down = loss();
          params.gate_w[k](i) = keep;
          const double fd = (up - down) / (2 * test::kFdStep);
          CHECK(std::abs(fd - grad.gate_w[k](i)) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
        const double keep = params.gate_b[k];
        params.gate_b[k] = keep + test::kFdStep;
        const double up = loss();
        params.gate_b[k] = keep - test::kFdStep;
        const double down = loss();
        params.gate_b[k] = keep;
        const double fd = (up - down) / (2 * test::kFdStep);
        CHECK(std::abs(fd - grad.gate_b[k]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    } else {
      for (std::size_t k = 0; k < kNumGates; ++k) CHECK(grad.gate_w[k].isZero());
    }
  }
}

}  // TEST_SUITE
