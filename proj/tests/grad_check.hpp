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

#ifndef RIGL_TESTS_GRAD_CHECK_HPP_
#define RIGL_TESTS_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "rigl/common.hpp"

namespace rigl::test {

inline constexpr double kFdStep = 1e-5;

// Central differences of f over every entry of the given matrices, which f
// must read through the same pointers.
inline std::vector<double> numeric_gradient(const std::vector<Mat*>& params,
                                            const std::function<double()>& f) {
  std::vector<double> out;
  for (Mat* m : params) {
    for (Eigen::Index j = 0; j < m->cols(); ++j) {
      for (Eigen::Index i = 0; i < m->rows(); ++i) {
        const double keep = (*m)(i, j);
        (*m)(i, j) = keep + kFdStep;
        const double up = f();
        (*m)(i, j) = keep - kFdStep;
        const double down = f();
        (*m)(i, j) = keep;
        out.push_back((up - down) / (2.0 * kFdStep));
      }
    }
  }
  return out;
}

inline std::vector<double> flatten(const std::vector<const Mat*>& mats) {
  std::vector<double> out;
  for (const Mat* m : mats) {
    for (Eigen::Index j = 0; j < m->cols(); ++j) {
      for (Eigen::Index i = 0; i < m->rows(); ++i) out.push_back((*m)(i, j));
    }
  }
  return out;
}

// ||a - n|| / max(||a||, ||n||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace rigl::test

#endif  // RIGL_TESTS_GRAD_CHECK_HPP_
