// Copyright 2026 The ftrack Authors.
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

// Central finite-difference verification of analytic gradients.

#ifndef FTRACK_GRADCHECK_HPP
#define FTRACK_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ftrack/common.hpp"

namespace ftrack {

/// A live parameter (or input) block and its analytic gradient.
struct GradCheckEntry {
  std::string name;
  double* value = nullptr;
  const double* analytic = nullptr;
  Index size = 0;
};

template <typename A, typename B>
GradCheckEntry grad_entry(std::string name, Eigen::MatrixBase<A>& value,
                          const Eigen::MatrixBase<B>& analytic) {
  if (value.size() != analytic.size())
    throw Error(Errc::shape_mismatch, "grad_check: gradient shape for " + name);
  return {std::move(name), value.derived().data(), analytic.derived().data(),
          value.size()};
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]"
  Index coordinates = 0;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double grad_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Perturbs every coordinate by +-h and compares (L+ - L-) / 2h with the
/// analytic gradient. `loss` must be a pure function of the live values.
inline GradCheckResult grad_check(const std::vector<GradCheckEntry>& entries,
                                  const std::function<double()>& loss,
                                  double h = 1e-5) {
  GradCheckResult result;
  for (const auto& e : entries) {
    for (Index i = 0; i < e.size; ++i) {
      const double saved = e.value[i];
      e.value[i] = saved + h;
      const double up = loss();
      e.value[i] = saved - h;
      const double down = loss();
      e.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = grad_relative_error(e.analytic[i], numeric);
      ++result.coordinates;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = err;
        result.worst = e.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace ftrack

#endif  // FTRACK_GRADCHECK_HPP
