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

#include "rigl/profile_init.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

namespace rigl {

std::size_t ceil_fraction(double fraction, std::size_t n) {
  const double raw = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  if (raw <= 0.0) return 0;
  return std::min(n, static_cast<std::size_t>(raw));
}

MobilityGraph build_mobility_graph(std::span<const std::size_t> categories, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    fail(ErrorKind::kConfig, "mobility-graph fraction must lie in (0, 1]");
  }
  const std::size_t n = ceil_fraction(fraction, categories.size());
  MobilityGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back(categories[i]);
    if (i + 1 < n) g.edges[{categories[i], categories[i + 1]}] += 1.0;
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
  return g;
}

Vec stationary_distribution(const MobilityGraph& graph, std::size_t num_categories) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(num_categories));
  const std::size_t k = graph.nodes.size();
  if (k == 0) return out;
  auto local = [&](std::size_t c) {
    return static_cast<Eigen::Index>(
        std::lower_bound(graph.nodes.begin(), graph.nodes.end(), c) - graph.nodes.begin());
  };
  const auto kk = static_cast<Eigen::Index>(k);
  Mat P = Mat::Zero(kk, kk);
  for (const auto& [edge, w] : graph.edges) P(local(edge.first), local(edge.second)) += w;
  for (Eigen::Index i = 0; i < kk; ++i) {
    const double s = P.row(i).sum();
    if (s > 0.0) {
      P.row(i) /= s;
    } else {
      P(i, i) = 1.0;
    }
  }
  const Mat lazy = 0.5 * (Mat::Identity(kk, kk) + P);
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(kk, 1.0 / static_cast<double>(k));
  for (int it = 0; it < 100000; ++it) {
    Eigen::RowVectorXd next = pi * lazy;
    const double delta = (next - pi).lpNorm<1>();
    pi = next;
    if (delta < 1e-14) break;
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (graph.nodes[i] < num_categories) {
      out(static_cast<Eigen::Index>(graph.nodes[i])) = pi(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

std::uint64_t user_seed(std::uint64_t seed, std::size_t user_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(user_index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(user_index) >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

namespace {

Vec spectral_lite(const MobilityGraph& graph, std::size_t dim, std::size_t num_categories,
                  std::uint64_t rng_seed) {
  const Vec pi = stationary_distribution(graph, num_categories);
  Vec v = Vec::Zero(static_cast<Eigen::Index>(dim));
  const auto n = std::min<Eigen::Index>(v.size(), pi.size());
  v.head(n) = pi.head(n);
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += noise(rng);
  return v;
}

Vec random_init(const MobilityGraph&, std::size_t dim, std::size_t, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Vec v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
  return v;
}

struct Registry {
  std::mutex mu;
  std::map<std::string, UserInitializer> table{{"spectral-lite", spectral_lite},
                                               {"random", random_init}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_user_initializer(const std::string& name, UserInitializer init) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.table[name] = std::move(init);
}

std::vector<std::string> user_initializer_names() {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> names;
  for (const auto& [name, fn] : r.table) names.push_back(name);
  return names;
}

UserTable init_user_states(const std::vector<std::string>& user_ids,
                           std::span<const MobilityGraph> graphs, std::size_t dim,
                           std::size_t num_categories, const std::string& method,
                           std::uint64_t seed) {
  if (dim < 2) fail(ErrorKind::kConfig, "user dimension must be >= 2");
  if (user_ids.size() != graphs.size()) {
    fail(ErrorKind::kInvalidArgument, "one mobility graph per user is required");
  }
  UserInitializer init;
  {
    auto& r = registry();
    std::lock_guard lock(r.mu);
    auto it = r.table.find(method);
    if (it == r.table.end()) fail(ErrorKind::kConfig, "unknown user initializer: " + method);
    init = it->second;
  }
  UserTable table;
  table.user_ids = user_ids;
  table.seed = seed;
  table.method = method;
  table.vectors = Mat(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(graphs.size()));
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    Vec v = init(graphs[i], dim, num_categories, user_seed(seed, i));
    if (static_cast<std::size_t>(v.size()) != dim || !v.allFinite()) {
      fail(ErrorKind::kNumeric, "initializer '" + method + "' produced an invalid vector");
    }
    table.vectors.col(static_cast<Eigen::Index>(i)) = v;
  }
  return table;
}

}  // namespace rigl
