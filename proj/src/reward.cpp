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

#include "rigl/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace rigl {

double distance_km(LatLon a, LatLon b) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kRad;
  const double dlon = (b.lon - a.lon) * kRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double r_d_from_km(double km) { return 1.0 / std::max(km, kMinDistanceKm); }

double r_d(LatLon real, LatLon pred) { return r_d_from_km(distance_km(real, pred)); }

std::vector<std::string> name_tokens(const std::string& name) {
  std::vector<std::string> out;
  std::istringstream in(name);
  std::string tok;
  while (in >> tok) {
    std::size_t b = 0;
    std::size_t e = tok.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
    if (b == e) continue;
    std::string t = tok.substr(b, e - b);
    for (char& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out.push_back(std::move(t));
  }
  return out;
}

CategoryVectors CategoryVectors::from_words(const std::vector<std::string>& words,
                                            const Mat& word_vectors,
                                            std::span<const std::string> category_names) {
  if (static_cast<std::size_t>(word_vectors.cols()) != words.size()) {
    fail(ErrorKind::kInvalidArgument, "one vector per word is required");
  }
  std::map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < words.size(); ++i) {
    index.try_emplace(words[i], static_cast<Eigen::Index>(i));
  }
  Mat out = Mat::Zero(word_vectors.rows(), static_cast<Eigen::Index>(category_names.size()));
  for (std::size_t c = 0; c < category_names.size(); ++c) {
    int found = 0;
    for (const auto& tok : name_tokens(category_names[c])) {
      auto it = index.find(tok);
      if (it == index.end()) continue;
      out.col(static_cast<Eigen::Index>(c)) += word_vectors.col(it->second);
      ++found;
    }
    if (found > 0) out.col(static_cast<Eigen::Index>(c)) /= found;
  }
  return CategoryVectors(std::move(out));
}

CategoryVectors CategoryVectors::from_word_file(const std::string& path,
                                                std::span<const std::string> category_names) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open word-vector file: " + path);
  // Only words appearing in some category name are kept.
  std::map<std::string, int> wanted;
  for (const auto& name : category_names)
    for (auto& t : name_tokens(name)) wanted.emplace(std::move(t), 0);

  std::vector<std::string> words;
  std::vector<std::vector<double>> rows;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> coef;
    double v;
    while (ls >> v) coef.push_back(v);
    if (!ls.eof()) {
      fail(ErrorKind::kIo, path + ":" + std::to_string(line_no) + ": bad coefficient");
    }
    // word2vec text files start with "<count> <dim>"
    if (coef.empty() || (line_no == 1 && coef.size() == 1)) continue;
    if (dim == 0) dim = coef.size();
    if (coef.size() != dim) {
      fail(ErrorKind::kIo, path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " coefficients");
    }
    for (char& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (!wanted.contains(word)) continue;
    words.push_back(std::move(word));
    rows.push_back(std::move(coef));
  }
  if (dim == 0) fail(ErrorKind::kIo, "word-vector file has no vectors: " + path);
  Mat wv(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t i = 0; i < dim; ++i)
      wv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[j][i];
  CategoryVectors out = from_words(words, wv, category_names);
  log_info("word_vectors_loaded", {{"path", path},
                                   {"dim", static_cast<std::uint64_t>(dim)},
                                   {"matched_words", static_cast<std::uint64_t>(words.size())},
                                   {"oov_categories", static_cast<std::uint64_t>(out.zero_vectors())}});
  return out;
}

CategoryVectors CategoryVectors::one_hot(std::size_t num_categories) {
  const auto n = static_cast<Eigen::Index>(num_categories);
  return CategoryVectors(Mat::Identity(n, n));
}

std::size_t CategoryVectors::zero_vectors() const {
  std::size_t n = 0;
  for (Eigen::Index c = 0; c < vectors_.cols(); ++c) n += vectors_.col(c).isZero(0.0) ? 1 : 0;
  return n;
}

double cosine(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double CategoryVectors::cosine(std::size_t a, std::size_t b) const {
  if (a >= size() || b >= size()) fail(ErrorKind::kLookup, "unknown category index");
  return rigl::cosine(vectors_.col(static_cast<Eigen::Index>(a)),
                      vectors_.col(static_cast<Eigen::Index>(b)));
}

double r_c(std::size_t cat_real, std::size_t cat_pred, const CategoryVectors& vectors) {
  return vectors.cosine(cat_real, cat_pred);
}

double r_p(std::size_t poi_real, std::size_t poi_pred) { return poi_real == poi_pred ? 1.0 : 0.0; }

void RewardWeights::validate() const {
  for (double v : {d, c, p}) {
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorKind::kConfig, "reward weights must be finite and non-negative");
    }
  }
  if (d + c + p <= 0.0) fail(ErrorKind::kConfig, "at least one reward weight must be positive");
}

double reward_r1(const RewardComponents& c, const RewardWeights& w) {
  w.validate();
  return w.d * c.d + w.c * c.c + w.p * c.p;
}

double reward_r2(const RewardComponents& c, const RewardWeights& w, const RewardBaselines& b) {
  w.validate();
  return w.d * (c.d - b.d) + w.c * (c.c - b.c) + w.p * (c.p - b.p);
}

double reward(RewardVariant variant, const RewardComponents& c, const RewardWeights& w,
              const RewardBaselines& b) {
  return variant == RewardVariant::kR1 ? reward_r1(c, w) : reward_r2(c, w, b);
}

double nearest_rank_quantile(std::vector<double> samples, double q) {
  if (samples.empty()) fail(ErrorKind::kInvalidArgument, "quantile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) fail(ErrorKind::kInvalidArgument, "quantile must lie in (0, 1]");
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size()) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

CalibrationReport baselines_from_samples(std::span<const RewardComponents> samples) {
  if (samples.empty()) fail(ErrorKind::kState, "calibration collected no reward samples");
  std::vector<double> d, c, p;
  CalibrationReport rep;
  rep.samples = samples.size();
  rep.min = rep.max = samples.front();
  for (const auto& s : samples) {
    d.push_back(s.d);
    c.push_back(s.c);
    p.push_back(s.p);
    rep.min = {std::min(rep.min.d, s.d), std::min(rep.min.c, s.c), std::min(rep.min.p, s.p)};
    rep.max = {std::max(rep.max.d, s.d), std::max(rep.max.c, s.c), std::max(rep.max.p, s.p)};
  }
  rep.baselines = {nearest_rank_quantile(std::move(d), 0.25),
                   nearest_rank_quantile(std::move(c), 0.25),
                   nearest_rank_quantile(std::move(p), 0.25)};
  return rep;
}

}  // namespace rigl
