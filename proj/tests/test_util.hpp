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

#ifndef RIGL_TESTS_TEST_UTIL_HPP_
#define RIGL_TESTS_TEST_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "rigl/common.hpp"
#include "rigl/ingest.hpp"
#include "rigl/spatial_kg.hpp"

namespace rigl::test {

inline std::string data_path(const std::string& name) {
  return std::string(RIGL_TEST_DATA) + "/" + name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("rigl-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
  return v;
}

inline Mat random_mat(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = g(rng);
  }
  return m;
}

inline CheckinEvent checkin(const std::string& user, const std::string& poi,
                            const std::string& cat, double lat, double lon, Timestamp t) {
  return CheckinEvent{user, poi, cat, cat + " place", lat, lon, t};
}

// 4 POIs, 2 categories, 2 zones on a 1x2 grid over [0,1]^2.
inline GridSpec toy_grid() { return GridSpec{0.0, 1.0, 0.0, 1.0, 1, 2}; }

inline SpatialKG toy_kg() {
  const CheckinEvent ev[] = {
      checkin("u1", "a0", "A", 0.5, 0.25, 1), checkin("u1", "a1", "A", 0.5, 0.75, 2),
      checkin("u2", "b0", "B", 0.5, 0.25, 3), checkin("u2", "b1", "B", 0.5, 0.75, 4)};
  return build_spatial_kg(ev, toy_grid());
}

}  // namespace rigl::test

#endif  // RIGL_TESTS_TEST_UTIL_HPP_
