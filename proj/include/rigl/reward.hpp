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

#ifndef RIGL_REWARD_HPP_
#define RIGL_REWARD_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rigl/common.hpp"

namespace rigl {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kMinDistanceKm = 0.01;

struct LatLon {
  double lat;
  double lon;
};

// Great-circle (haversine) distance.
double distance_km(LatLon a, LatLon b);

// 1 / max(distance, 0.01 km), so the value lies in (0, 100].
double r_d(LatLon real, LatLon pred);
double r_d_from_km(double km);

// Per-category vectors; a zero vector means "no information".
class CategoryVectors {
 public:
  CategoryVectors() = default;
  explicit CategoryVectors(Mat vectors) : vectors_(std::move(vectors)) {}

  // Averages the word vectors of each lowercased whitespace token of every
  // name; names with no known token get a zero vector.
  static CategoryVectors from_word_file(const std::string& path,
                                        std::span<const std::string> category_names);
  static CategoryVectors from_words(const std::vector<std::string>& words, const Mat& word_vectors,
                                    std::span<const std::string> category_names);
  // Unit basis vector per category.
  static CategoryVectors one_hot(std::size_t num_categories);

  std::size_t size() const { return static_cast<std::size_t>(vectors_.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors_.rows()); }
  const Mat& vectors() const { return vectors_; }
  std::size_t zero_vectors() const;

  double cosine(std::size_t a, std::size_t b) const;

 private:
  Mat vectors_;  // dim x categories
};

// Lowercased tokens of a category name; punctuation at token edges dropped.
std::vector<std::string> name_tokens(const std::string& name);

// Cosine similarity with 0 whenever either vector is zero.
double cosine(const Vec& a, const Vec& b);

double r_c(std::size_t cat_real, std::size_t cat_pred, const CategoryVectors& vectors);
double r_p(std::size_t poi_real, std::size_t poi_pred);

struct RewardComponents {
  double d = 0.0;
  double c = 0.0;
  double p = 0.0;
};

struct RewardWeights {
  double d = 1.0;
  double c = 1.0;
  double p = 1.0;

  // Non-negative, finite and not all zero.
  void validate() const;
};

struct RewardBaselines {
  double d = 0.0;
  double c = 0.0;
  double p = 0.0;
};

enum class RewardVariant { kR1, kR2 };

double reward_r1(const RewardComponents& c, const RewardWeights& w);
double reward_r2(const RewardComponents& c, const RewardWeights& w, const RewardBaselines& b);
double reward(RewardVariant variant, const RewardComponents& c, const RewardWeights& w,
              const RewardBaselines& b);

// Value at 1-based rank ceil(q n) of the ascending sample.
double nearest_rank_quantile(std::vector<double> samples, double q);

struct CalibrationReport {
  RewardBaselines baselines;
  std::size_t samples = 0;
  std::size_t rounds = 0;
  RewardComponents min;
  RewardComponents max;
};

// First quartile of each component over the collected samples.
CalibrationReport baselines_from_samples(std::span<const RewardComponents> samples);

}  // namespace rigl

#endif  // RIGL_REWARD_HPP_
