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

#include <cmath>
#include <random>

#include "qnet_check.hpp"
#include "rigl/agent.hpp"
#include "test_util.hpp"

using namespace rigl;
using test::checkin;

namespace {

std::vector<Transition> random_batch(std::size_t n, std::size_t in, std::size_t actions,
                                     std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> a(0, actions - 1);
  std::normal_distribution<double> r;
  std::vector<Transition> out(n);
  for (auto& t : out) {
    t = Transition{test::random_vec(in, rng), a(rng), r(rng), test::random_vec(in, rng), 0.0};
  }
  return out;
}

}  // namespace

TEST_SUITE("agent") {

TEST_CASE("pooling") {
  auto kg = test::toy_kg();
  KgState s;
  const Vec v = (Vec(3) << 1, -2, 3).finished();
  s.heads = v.replicate(1, kg.num_pois());
  s.tails = v.replicate(1, kg.num_tails());
  s.relations = Mat::Zero(3, 2);
  CHECK((pool_kg(s, kg) - v).norm() < 1e-15);

  std::mt19937_64 rng(1);
  s.heads = test::random_mat(3, kg.num_pois(), rng);
  s.tails = test::random_mat(3, kg.num_tails(), rng);
  Vec belong = Vec::Zero(3), locate = Vec::Zero(3);
  double nb = 0, nl = 0;
  for (std::size_t p = 0; p < kg.num_pois(); ++p) {
    belong += s.heads.col(p);
    locate += s.heads.col(p);
    ++nb;
    ++nl;
  }
  for (std::size_t t = 0; t < kg.num_tails(); ++t) {
    if (t < kg.num_categories()) {
      belong += s.tails.col(kg.category_tail(t));
      ++nb;
    }
    if (t < kg.num_zones()) {
      locate += s.tails.col(kg.zone_tail(t));
      ++nl;
    }
  }
  const Vec expect = 0.5 * belong / nb + 0.5 * locate / nl;
  CHECK((pool_kg(s, kg) - expect).cwiseAbs().maxCoeff() < 1e-12);
  s.heads = Mat::Zero(3, 1);
  CHECK_THROWS_AS(pool_kg(s, kg), Error);
}

TEST_CASE("Q-network forward") {
  DenseLayer l{Mat::Identity(2, 2), (Vec(2) << 1, -1).finished()};
  QNetwork one({l});
  CHECK(one.forward((Vec(2) << 2, 3).finished()) == (Vec(2) << 3, 2).finished());

  DenseLayer h{(Mat(2, 2) << 1, -1, -1, 1).finished(), Vec::Zero(2)};
  DenseLayer o{(Mat(2, 2) << 1, 0, 2, 3).finished(), (Vec(2) << 0.5, 0).finished()};
  QNetwork two({h, o});
  // hidden = relu([2-3, 3-2]) = [0, 1]; out = [0.5, 3]
  CHECK(two.forward((Vec(2) << 2, 3).finished()) == (Vec(2) << 0.5, 3).finished());

  QNetwork net(6, {5, 4}, 7, 3);
  CHECK(net.output_dim() == 7);
  CHECK(net.input_dim() == 6);
  CHECK(net.num_parameters() == 6 * 5 + 5 + 5 * 4 + 4 + 4 * 7 + 7);
  auto zero = QNetwork::zeros_like(net);
  std::mt19937_64 rng(2);
  CHECK(zero.forward(test::random_vec(6, rng)).isZero());
  CHECK(QNetwork(6, {5, 4}, 7, 3) == net);
  CHECK_FALSE(QNetwork(6, {5, 4}, 7, 4) == net);
  CHECK_THROWS_AS(net.forward(Vec::Zero(5)), Error);
}

TEST_CASE("TD loss gradient matches finite differences") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 6; ++rep) {
    QNetwork q_e(4, {6, 5}, 3, 10 + rep);
    const QNetwork q_t(4, {6, 5}, 3, 100 + rep);
    const auto variant = rep % 2 ? PolicyVariant::kDqn : PolicyVariant::kDdqn;
    auto batch = random_batch(5, 4, 3, rng);
    // The double target depends on argmax Q_e(s') and ReLU has a kink at 0;
    // keep FD steps away from both.
    for (auto& t : batch) {
      auto gap = [&] {
        Vec q = q_e.forward(t.next_state);
        std::sort(q.data(), q.data() + q.size());
        return q(q.size() - 1) - q(q.size() - 2);
      };
      while (gap() < 1e-3) t.next_state = test::random_vec(4, rng);
      while (test::min_hidden_preactivation(q_e, t.state) < 1e-3) {
        t.state = test::random_vec(4, rng);
      }
    }
    SparseQGradient g(q_e);
    td_loss(batch, q_e, q_t, variant, 0.9, &g);
    const auto numeric = test::qnet_numeric_gradient(
        q_e, [&] { return td_loss(batch, q_e, q_t, variant, 0.9).loss; });
    CAPTURE(rep);
    CHECK(test::relative_error(test::flatten_qnet(g.to_dense(q_e)), numeric) <= 1e-4);
  }
}

TEST_CASE("input gradients match finite differences") {
  std::mt19937_64 rng(4);
  QNetwork net(6, {7}, 3, 5);
  Vec x = test::random_vec(6, rng);
  QNetwork::Cache cache;
  net.forward(x, cache);
  for (std::size_t a = 0; a < 3; ++a) {
    const Vec g = net.input_gradient(cache, a);
    for (Eigen::Index i = 0; i < 6; ++i) {
      Vec up = x, down = x;
      up(i) += test::kFdStep;
      down(i) -= test::kFdStep;
      const double fd = (net.forward(up)(a) - net.forward(down)(a)) / (2 * test::kFdStep);
      CHECK(g(i) == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  const Vec d = test::random_vec(6, rng);
  const Vec back = scale_state_backward(x, StateScaling::kBlockL2, d);
  for (Eigen::Index i = 0; i < 6; ++i) {
    Vec up = x, down = x;
    up(i) += test::kFdStep;
    down(i) -= test::kFdStep;
    const double fd = (d.dot(scale_state(up, StateScaling::kBlockL2)) -
                       d.dot(scale_state(down, StateScaling::kBlockL2))) / (2 * test::kFdStep);
    CHECK(back(i) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("block scaling") {
  Vec obs(4);
  obs << 3, 4, 0, 0;
  const Vec s = scale_state(obs, StateScaling::kBlockL2);
  CHECK(s == (Vec(4) << 0.6, 0.8, 0, 0).finished());
  CHECK(scale_state(obs, StateScaling::kNone) == obs);
  CHECK_THROWS_AS(scale_state(Vec::Ones(3), StateScaling::kBlockL2), Error);
}

TEST_CASE("action selection") {
  std::mt19937_64 rng(5);
  const Vec q = (Vec(3) << 1, 3, 2).finished();
  for (int i = 0; i < 100; ++i) CHECK(select_action(q, 0.0, rng) == 1);
  CHECK(greedy_action((Vec(2) << 5, 5).finished()) == 0);
  CHECK_THROWS_AS(greedy_action(Vec()), Error);

  const std::size_t n = 100000, k = 4;
  std::vector<double> hits(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) hits[select_action(Vec::Zero(k), 1.0, rng)] += 1;
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (double h : hits) CHECK(std::abs(h - n / 4.0) < 3 * sigma);
}

TEST_CASE("targets") {
  const Vec qe = (Vec(2) << 1, 3).finished(), qt = (Vec(2) << 2, 0.5).finished();
  CHECK(compute_target(PolicyVariant::kDdqn, 1, qe, qt, 0.9) == doctest::Approx(1.45));
  CHECK(compute_target(PolicyVariant::kDqn, 1, qe, qt, 0.9) == doctest::Approx(2.8));
  CHECK(compute_target(PolicyVariant::kDdqn, 1, qe, qt, 0.0) == 1.0);
  CHECK(compute_target(PolicyVariant::kDqn, 1, qe, qt, 0.0) == 1.0);
  CHECK(compute_target(PolicyVariant::kDqn, 1, qt, qt, 0.9) ==
        compute_target(PolicyVariant::kDdqn, 1, qt, qt, 0.9));
  CHECK_THROWS_AS(compute_target(PolicyVariant::kDqn, 1, qe, Vec::Zero(3), 0.9), Error);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> g(0, 0.99);
  for (int i = 0; i < 10000; ++i) {
    const Vec a = test::random_vec(5, rng), b = test::random_vec(5, rng);
    const double gamma = g(rng), r = a(0);
    CHECK(compute_target(PolicyVariant::kDdqn, r, a, b, gamma) <=
          compute_target(PolicyVariant::kDqn, r, a, b, gamma));
  }
}

TEST_CASE("double targets reduce overestimation on a noisy MDP") {
  double dqn = 0, ddqn = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    dqn += test::noisy_mdp_overestimation(PolicyVariant::kDqn, seed, 1500);
    ddqn += test::noisy_mdp_overestimation(PolicyVariant::kDdqn, seed, 1500);
  }
  MESSAGE("mean max-Q: dqn " << dqn / 20 << ", ddqn " << ddqn / 20);
  CHECK(ddqn <= dqn);
}

TEST_CASE("training step") {
  QNetwork q(2, {}, 2, 1);
  q.layers()[0].w.setZero();
  q.layers()[0].b << 1.0, 0.0;
  // y = r + 0.9 * 1 = 1 with r = 0.1; Q(s, 0) = 1 already.
  std::vector<Transition> fixed{Transition{Vec::Ones(2), 0, 0.1, Vec::Ones(2), 0.0}};
  const QNetwork before = q;
  auto res = train_step(fixed, q, before, PolicyVariant::kDqn, 0.9, 0.1);
  CHECK(res.loss == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(q == before);

  // Single transition: loss = (Q - y)^2 by hand.
  std::vector<Transition> one{Transition{Vec::Ones(2), 1, 2.0, Vec::Ones(2), 0.0}};
  res = td_loss(one, q, q, PolicyVariant::kDqn, 0.5);
  CHECK(res.loss == doctest::Approx(std::pow(0.0 - (2.0 + 0.5 * 1.0), 2)));

  std::mt19937_64 rng(7);
  QNetwork big(4, {6}, 3, 8);
  auto batch = random_batch(8, 4, 3, rng);
  for (auto& t : batch) t.reward *= 1e3;
  SparseQGradient g(big);
  td_loss(batch, big, big, PolicyVariant::kDdqn, 0.9, &g);
  const double norm = std::sqrt(g.squared_norm());
  REQUIRE(norm > 1.0);
  QNetwork clipped = big;
  train_step(batch, clipped, big, PolicyVariant::kDdqn, 0.9, 0.01, 1.0);
  auto a = test::flatten_qnet(clipped), b = test::flatten_qnet(big);
  double moved = 0;
  for (std::size_t i = 0; i < a.size(); ++i) moved += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(std::sqrt(moved) == doctest::Approx(0.01).epsilon(1e-9));
  QNetwork free_step = big;
  train_step(batch, free_step, big, PolicyVariant::kDdqn, 0.9, 0.01, 0.0);
  a = test::flatten_qnet(free_step);
  moved = 0;
  for (std::size_t i = 0; i < a.size(); ++i) moved += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(std::sqrt(moved) == doctest::Approx(0.01 * norm).epsilon(1e-9));

  for (auto& t : batch) t.reward = NAN;
  CHECK_THROWS_AS(train_step(batch, big, big, PolicyVariant::kDqn, 0.9, 0.01), Error);
}

TEST_CASE("target synchronisation") {
  QNetwork e(3, {4}, 2, 1), t(3, {4}, 2, 2);
  CHECK_FALSE(sync_target(e, t, 0, 5));
  CHECK_FALSE(sync_target(e, t, 4, 5));
  CHECK(sync_target(e, t, 5, 5));
  CHECK(t == e);
  e.layers()[0].b(0) += 1.0;
  CHECK_FALSE(sync_target(e, t, 6, 5));
  CHECK_FALSE(t == e);
  CHECK(sync_target(e, t, 7, 1));
  CHECK(t == e);
  CHECK_THROWS_AS(sync_target(e, t, 1, 0), Error);
}

TEST_CASE("epsilon schedule and config checks") {
  AgentConfig cfg;
  CHECK(epsilon_at(cfg, 0, 100) == 1.0);
  CHECK(epsilon_at(cfg, 25, 100) == doctest::Approx(0.525));
  CHECK(epsilon_at(cfg, 50, 100) == doctest::Approx(0.05));
  CHECK(epsilon_at(cfg, 99, 100) == doctest::Approx(0.05));
  CHECK_NOTHROW(cfg.validate());
  for (auto mutate : std::vector<std::function<void(AgentConfig&)>>{
           [](AgentConfig& c) { c.gamma = 1.0; }, [](AgentConfig& c) { c.lr = 0; },
           [](AgentConfig& c) { c.target_sync = 0; }, [](AgentConfig& c) { c.grad_clip = -1; },
           [](AgentConfig& c) { c.eps_end = 2; }, [](AgentConfig& c) { c.hidden = {0}; }}) {
    AgentConfig bad;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), Error);
  }
}

}  // TEST_SUITE
