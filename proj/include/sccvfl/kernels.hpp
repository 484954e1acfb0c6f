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

#ifndef SCCVFL_KERNELS_HPP_
#define SCCVFL_KERNELS_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/matrix.hpp"

namespace sccvfl {

// RBF kernel spec.  bandwidth <= 0 selects the median heuristic applied to
// the pooled sample at the call site.
struct KernelSpec {
  double bandwidth = -1.0;

  bool median_heuristic() const { return bandwidth <= 0.0; }
};

// Vertical stack of row blocks (used to pool samples for the median
// heuristic).
inline Matrix vstack(const std::vector<Matrix>& parts) {
  int rows = 0;
  for (const auto& p : parts) rows += p.rows();
  check(rows > 0, Error::Kind::kShape, "empty row stack");
  Matrix out(rows, parts[0].cols());
  int at = 0;
  for (const auto& p : parts) {
    check(p.cols() == out.cols(), Error::Kind::kShape, "row stack width mismatch");
    for (int i = 0; i < p.rows(); ++i)
      for (int j = 0; j < p.cols(); ++j) out(at + i, j) = p(i, j);
    at += p.rows();
  }
  return out;
}

// Median pairwise distance of the pooled sample, zero distances excluded.
// Falls back to 1 when every point coincides.
inline double median_bandwidth(const Matrix& pooled) {
  check(pooled.rows() > 0, Error::Kind::kShape, "median_bandwidth on empty sample");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows()) * (pooled.rows() - 1) / 2);
  for (int i = 0; i < pooled.rows(); ++i)
    for (int j = i + 1; j < pooled.rows(); ++j) {
      const double v = std::sqrt(squared_distance(pooled.row(i), pooled.row(j), pooled.cols()));
      if (v > 0.0) d.push_back(v);
    }
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double m = d[mid];
  if (d.size() % 2 == 0) {
    const double lo = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (lo + m);
  }
  return m;
}

inline double resolve_bandwidth(const Matrix& x, const Matrix& y, const KernelSpec& spec) {
  if (!spec.median_heuristic()) {
    check(spec.bandwidth > 0.0, Error::Kind::kDomain, "explicit bandwidth must be positive");
    return spec.bandwidth;
  }
  return median_bandwidth(vstack({x, y}));
}

// G[i,j] = exp(-||x_i - y_j||^2 / (2 sigma_b^2))
inline Matrix rbf_gram(const Matrix& x, const Matrix& y, const KernelSpec& spec) {
  check(x.rows() > 0 && y.rows() > 0, Error::Kind::kShape, "rbf_gram on empty input");
  check(x.cols() == y.cols(), Error::Kind::kShape, "rbf_gram width mismatch");
  const double sigma = resolve_bandwidth(x, y, spec);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Matrix g(x.rows(), y.rows());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < y.rows(); ++j)
      g(i, j) = std::exp(-squared_distance(x.row(i), y.row(j), x.cols()) * inv);
  return g;
}

// Biased HSIC estimator trace(K H L H) / (n-1)^2, clamped at 0 against
// negative round-off.  K and L are square Gram matrices over the same sample.
inline double hsic(const Matrix& k, const Matrix& l) {
  check(k.rows() == k.cols() && l.rows() == l.cols(), Error::Kind::kShape, "hsic needs square matrices");
  check(k.rows() == l.rows(), Error::Kind::kShape, "hsic size mismatch");
  const int n = k.rows();
  check(n >= 2, Error::Kind::kShape, "hsic needs n >= 2");
  auto center = [n](const Matrix& m) {
    std::vector<double> rmean(static_cast<std::size_t>(n), 0.0), cmean(static_cast<std::size_t>(n), 0.0);
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        rmean[static_cast<std::size_t>(i)] += m(i, j);
        cmean[static_cast<std::size_t>(j)] += m(i, j);
        total += m(i, j);
      }
    for (auto& v : rmean) v /= n;
    for (auto& v : cmean) v /= n;
    total /= static_cast<double>(n) * n;
    Matrix c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        c(i, j) = m(i, j) - rmean[static_cast<std::size_t>(i)] - cmean[static_cast<std::size_t>(j)] + total;
    return c;
  };
  const Matrix kc = center(k);
  const Matrix lc = center(l);
  double tr = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) tr += kc(i, j) * lc(j, i);
  const double denom = static_cast<double>(n - 1) * (n - 1);
  return std::max(0.0, tr / denom);
}

// MMD^2 between samples X and Y.  The unbiased estimator may be slightly
// negative; the biased variant (full means, clamped at 0) is the one to use
// as a loss term.
inline double mmd2(const Matrix& x, const Matrix& y, const KernelSpec& spec, bool biased = false) {
  check(x.rows() >= 2 && y.rows() >= 2, Error::Kind::kShape, "mmd2 needs at least 2 rows per sample");
  KernelSpec fixed = spec;
  if (spec.median_heuristic()) fixed.bandwidth = median_bandwidth(vstack({x, y}));
  const Matrix kxx = rbf_gram(x, x, fixed);
  const Matrix kyy = rbf_gram(y, y, fixed);
  const Matrix kxy = rbf_gram(x, y, fixed);
  const double n = x.rows(), m = y.rows();
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int i = 0; i < kxx.rows(); ++i)
    for (int j = 0; j < kxx.cols(); ++j)
      if (biased || i != j) sxx += kxx(i, j);
  for (int i = 0; i < kyy.rows(); ++i)
    for (int j = 0; j < kyy.cols(); ++j)
      if (biased || i != j) syy += kyy(i, j);
  for (int i = 0; i < kxy.rows(); ++i)
    for (int j = 0; j < kxy.cols(); ++j) sxy += kxy(i, j);
  double v;
  if (biased) {
    v = sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m);
    v = std::max(0.0, v);
  } else {
    v = sxx / (n * (n - 1.0)) + syy / (m * (m - 1.0)) - 2.0 * sxy / (n * m);
  }
  return v;
}

// Biased MMD^2 together with its gradient w.r.t. the rows of X (Y and the
// bandwidth are treated as constants).  The caller pins the bandwidth so the
// finite-difference oracle sees a fixed kernel.
struct MmdWithGrad {
  double value = 0.0;
  Matrix dx;
};

inline MmdWithGrad mmd2_biased_grad_x(const Matrix& x, const Matrix& y, double sigma) {
  check(sigma > 0.0, Error::Kind::kDomain, "mmd gradient needs an explicit bandwidth");
  check(x.rows() >= 2 && y.rows() >= 2, Error::Kind::kShape, "mmd2 needs at least 2 rows per sample");
  KernelSpec spec{sigma};
  const Matrix kxx = rbf_gram(x, x, spec);
  const Matrix kxy = rbf_gram(x, y, spec);
  const Matrix kyy = rbf_gram(y, y, spec);
  const double n = x.rows(), m = y.rows();
  MmdWithGrad out;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int i = 0; i < kxx.rows(); ++i)
    for (int j = 0; j < kxx.cols(); ++j) sxx += kxx(i, j);
  for (int i = 0; i < kyy.rows(); ++i)
    for (int j = 0; j < kyy.cols(); ++j) syy += kyy(i, j);
  for (int i = 0; i < kxy.rows(); ++i)
    for (int j = 0; j < kxy.cols(); ++j) sxy += kxy(i, j);
  out.value = std::max(0.0, sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m));
  // d k(a,b) / d a = k(a,b) (b - a) / sigma^2
  out.dx = Matrix(x.rows(), x.cols());
  const double inv_s2 = 1.0 / (sigma * sigma);
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.rows(); ++j) {
      if (i == j) continue;
      const double c = 2.0 * kxx(i, j) * inv_s2 / (n * n);  // both orderings of the pair
      for (int d = 0; d < x.cols(); ++d) out.dx(i, d) += c * (x(j, d) - x(i, d));
    }
    for (int j = 0; j < y.rows(); ++j) {
      const double c = -2.0 * kxy(i, j) * inv_s2 / (n * m);
      for (int d = 0; d < x.cols(); ++d) out.dx(i, d) += c * (y(j, d) - x(i, d));
    }
  }
  return out;
}

}  // namespace sccvfl

#endif  // SCCVFL_KERNELS_HPP_
