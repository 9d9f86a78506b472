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

#include "rigl/replay.hpp"

#include <algorithm>
#include <cmath>

namespace rigl {

double priority_reward(const Transition& t) { return t.reward; }

double priority_td(double reward, double gamma, double max_q_next, double q_taken) {
  return reward + gamma * max_q_next - q_taken;
}

std::vector<double> sampling_probabilities(std::span<const double> priorities) {
  if (priorities.empty()) fail(ErrorKind::kState, "cannot sample from an empty memory");
  double top = priorities.front();
  for (double x : priorities) {
    if (!std::isfinite(x)) fail(ErrorKind::kNumeric, "non-finite replay priority");
    top = std::max(top, x);
  }
  std::vector<double> p(priorities.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(priorities[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) fail(ErrorKind::kConfig, "replay capacity must be positive");
}

void ReplayMemory::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
  ++inserted_;
}

std::size_t ReplayMemory::slot(std::size_t i) const {
  if (i >= items_.size()) fail(ErrorKind::kInvalidArgument, "replay index out of range");
  return (head_ + i) % items_.size();
}

const Transition& ReplayMemory::at(std::size_t i) const { return items_[slot(i)]; }
Transition& ReplayMemory::at(std::size_t i) { return items_[slot(i)]; }

std::vector<double> ReplayMemory::priorities() const {
  std::vector<double> out;
  out.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) out.push_back(at(i).priority);
  return out;
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t batch,
                                                      std::mt19937_64& rng) const {
  const std::vector<double> prio = priorities();
  const std::vector<double> probs = sampling_probabilities(prio);
  std::discrete_distribution<std::size_t> dist(probs.begin(), probs.end());
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = dist(rng);
  return out;
}

ReplayMemory ReplayMemory::restore(std::size_t capacity, std::vector<Transition> ring,
                                   std::size_t head, std::uint64_t inserted) {
  ReplayMemory m(capacity);
  if (ring.size() > capacity || (ring.size() < capacity && head != 0) ||
      (!ring.empty() && head >= ring.size()) || inserted < ring.size()) {
    fail(ErrorKind::kState, "inconsistent replay memory checkpoint");
  }
  m.items_ = std::move(ring);
  m.head_ = head;
  m.inserted_ = inserted;
  return m;
}

std::vector<Transition> sample_batch(const ReplayMemory& mem, std::size_t batch,
                                     std::mt19937_64& rng) {
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i : mem.sample_indices(batch, rng)) out.push_back(mem.at(i));
  return out;
}

}  // namespace rigl
