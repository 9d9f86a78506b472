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

#ifndef RIGL_PROFILE_INIT_HPP_
#define RIGL_PROFILE_INIT_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rigl/common.hpp"

namespace rigl {

// Category transition graph of one user. Nodes are global category indices.
struct MobilityGraph {
  std::vector<std::size_t> nodes;  // ascending, unique
  std::map<std::pair<std::size_t, std::size_t>, double> edges;

  double weight(std::size_t from, std::size_t to) const {
    auto it = edges.find({from, to});
    return it == edges.end() ? 0.0 : it->second;
  }
};

// ceil(fraction * n) with a small tolerance so that e.g. 0.9 * 10 gives 9.
std::size_t ceil_fraction(double fraction, std::size_t n);

// Built from the earliest ceil(fraction * n) entries of a time-ordered
// category sequence; edge weights count consecutive pairs.
MobilityGraph build_mobility_graph(std::span<const std::size_t> categories, double fraction);

struct UserTable {
  std::vector<std::string> user_ids;  // ascending
  Mat vectors;                        // dim x users
  std::uint64_t seed = 0;
  std::string method;

  std::size_t dim() const { return static_cast<std::size_t>(vectors.rows()); }
  std::size_t size() const { return user_ids.size(); }
};

// Produces one user's vector. `rng_seed` is already specific to the user.
using UserInitializer = std::function<Vec(const MobilityGraph& graph, std::size_t dim,
                                          std::size_t num_categories, std::uint64_t rng_seed)>;

void register_user_initializer(const std::string& name, UserInitializer init);
std::vector<std::string> user_initializer_names();

// Stationary category distribution of the user's transition chain.
// Dangling categories get a self-loop; the chain is made lazy (0.5 I + 0.5 P)
// and power-iterated from the uniform distribution over the user's nodes.
Vec stationary_distribution(const MobilityGraph& graph, std::size_t num_categories);

// Per-user seed derived from the run seed and the user's position.
std::uint64_t user_seed(std::uint64_t seed, std::size_t user_index);

UserTable init_user_states(const std::vector<std::string>& user_ids,
                           std::span<const MobilityGraph> graphs, std::size_t dim,
                           std::size_t num_categories, const std::string& method,
                           std::uint64_t seed);

}  // namespace rigl

#endif  // RIGL_PROFILE_INIT_HPP_
