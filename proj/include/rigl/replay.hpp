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

#ifndef RIGL_REPLAY_HPP_
#define RIGL_REPLAY_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rigl/common.hpp"

namespace rigl {

struct Transition {
  Vec state;
  std::size_t action = 0;
  double reward = 0.0;
  Vec next_state;
  double priority = 0.0;

  friend bool operator==(const Transition& a, const Transition& b) {
    return a.action == b.action && a.reward == b.reward && a.priority == b.priority &&
           a.state.size() == b.state.size() && a.state == b.state &&
           a.next_state.size() == b.next_state.size() && a.next_state == b.next_state;
  }
};

enum class PriorityKind { kReward, kTd };

// x = r
double priority_reward(const Transition& t);
// x = r + gamma * max_a Q(s', a) - Q(s, a)
double priority_td(double reward, double gamma, double max_q_next, double q_taken);

// Softmax of the priorities, shifted by their maximum.
std::vector<double> sampling_probabilities(std::span<const double> priorities);

// Fixed-capacity FIFO store.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::uint64_t inserted() const { return inserted_; }

  void push(Transition t);

  // i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  Transition& at(std::size_t i);

  std::vector<double> priorities() const;

  // Indices (as for at()) drawn with replacement from the softmax of the
  // stored priorities.
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

  // Raw ring layout, for checkpointing.
  const std::vector<Transition>& ring() const { return items_; }
  std::size_t head() const { return head_; }
  static ReplayMemory restore(std::size_t capacity, std::vector<Transition> ring,
                              std::size_t head, std::uint64_t inserted);

 private:
  std::size_t slot(std::size_t i) const;

  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // slot of the oldest item once full
  std::uint64_t inserted_ = 0;
};

std::vector<Transition> sample_batch(const ReplayMemory& mem, std::size_t batch,
                                     std::mt19937_64& rng);

}  // namespace rigl

#endif  // RIGL_REPLAY_HPP_
