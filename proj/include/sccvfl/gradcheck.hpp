/*
 * Copyright 2026 The sccvfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SCCVFL_GRADCHECK_HPP_
#define SCCVFL_GRADCHECK_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/nn.hpp"
#include "sccvfl/rng.hpp"

namespace sccvfl {

// Central-difference gradient oracle.  `loss` must be a deterministic
// function of the parameters behind `params` (dropout disabled, any sampling
// noise pinned).  Coordinates are subsampled per tensor to bound runtime.
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coords_per_tensor = 200;
  std::uint64_t subsample_seed = 17;
};

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-2});
  return std::fabs(analytic - numeric) / denom;
}

inline GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                         const TensorViews& params, const TensorViews& grads,
                                         const GradCheckOptions& opt = {}) {
  check(opt.step > 0.0, Error::Kind::kOracle, "finite-difference step must be positive");
  check(params.size() == grads.size(), Error::Kind::kShape, "gradcheck view count mismatch");
  GradCheckReport report;
  RngStream pick(opt.subsample_seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    check(params[t].size() == grads[t].size(), Error::Kind::kShape, "gradcheck tensor size mismatch");
    std::vector<std::size_t> coords(params[t].size());
    for (std::size_t k = 0; k < coords.size(); ++k) coords[k] = k;
    if (coords.size() > opt.max_coords_per_tensor) {
      pick.shuffle(coords.begin(), coords.end());
      coords.resize(opt.max_coords_per_tensor);
    }
    for (std::size_t k : coords) {
      double* p = params[t].data() + k;
      const double saved = *p;
      *p = saved + opt.step;
      const double up = loss();
      *p = saved - opt.step;
      const double down = loss();
      *p = saved;
      check(std::isfinite(up) && std::isfinite(down), Error::Kind::kOracle,
            "non-finite loss during finite-difference check");
      const double numeric = (up - down) / (2.0 * opt.step);
      const double analytic = grads[t][k];
      const double err = rel_err(analytic, numeric);
      ++report.checked;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_tensor = t;
        report.worst_index = k;
        report.analytic_at_worst = analytic;
        report.numeric_at_worst = numeric;
      }
    }
  }
  return report;
}

}  // namespace sccvfl

#endif  // SCCVFL_GRADCHECK_HPP_
