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

#ifndef SCCVFL_PRIVACY_HPP_
#define SCCVFL_PRIVACY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/matrix.hpp"
#include "sccvfl/rng.hpp"

namespace sccvfl::dp {

// ---------------------------------------------------------------------------
// Binning

enum class BinStrategy { kEqualWidth, kQuantile };

struct BinResult {
  std::vector<int> bins;
  std::vector<double> edges;  // K-1 interior edges, reusable on new samples
  bool degenerate = false;    // constant column under quantile binning
};

inline int bin_of(double v, const std::vector<double>& edges) {
  int b = 0;
  while (b < static_cast<int>(edges.size()) && v > edges[static_cast<std::size_t>(b)]) ++b;
  return b;
}

inline BinResult bin_feature(const std::vector<double>& values, int k, BinStrategy strategy) {
  check(k >= 2, Error::Kind::kDomain, "bin_feature needs K >= 2");
  check(!values.empty(), Error::Kind::kShape, "bin_feature on empty column");
  BinResult out;
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it, mx = *mx_it;
  if (strategy == BinStrategy::kEqualWidth) {
    if (mx == mn) {
      out.degenerate = true;
      for (int e = 1; e < k; ++e) out.edges.push_back(mn + e);  // arbitrary spacing, single populated bin
    } else {
      const double w = (mx - mn) / k;
      for (int e = 1; e < k; ++e) out.edges.push_back(mn + w * e);
    }
  } else {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    for (int e = 1; e < k; ++e) {
      const double q = static_cast<double>(e) / k;
      const double pos = q * (static_cast<double>(sorted.size()) - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(lo);
      const double edge = lo + 1 < sorted.size()
                              ? sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
                              : sorted[lo];
      out.edges.push_back(edge);
    }
    out.degenerate = mx == mn;
  }
  out.bins.reserve(values.size());
  for (double v : values) out.bins.push_back(bin_of(v, out.edges));
  return out;
}

// ---------------------------------------------------------------------------
// Contingency tables and the Gaussian mechanism

// Group-by-bin counts.  Raw counts are nonnegative integers; clipped or
// noisy variants may violate integrality and nonnegativity, which is why the
// post-release flag exists.
struct ContingencyTable {
  int feature = -1;
  Matrix counts;  // groups x K
  bool post_release = false;
};

inline ContingencyTable build_contingency(const std::vector<int>& bins, const std::vector<int>& s,
                                          int k, int feature = -1) {
  check(bins.size() == s.size(), Error::Kind::kShape, "bins/group length mismatch");
  int groups = 0;
  for (int g : s) groups = std::max(groups, g + 1);
  ContingencyTable t;
  t.feature = feature;
  t.counts = Matrix(std::max(groups, 2), k);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    check(bins[i] >= 0 && bins[i] < k, Error::Kind::kShape, "bin index out of range");
    t.counts(s[i], bins[i]) += 1.0;
  }
  return t;
}

inline double table_l2_norm(const ContingencyTable& t) {
  double s = 0.0;
  for (int i = 0; i < t.counts.rows(); ++i)
    for (int j = 0; j < t.counts.cols(); ++j) s += t.counts(i, j) * t.counts(i, j);
  return std::sqrt(s);
}

// c * min(1, S / ||c||_2): norm bounded by S, direction preserved.
inline ContingencyTable clip_table(const ContingencyTable& t, double clip_bound) {
  check(clip_bound > 0.0, Error::Kind::kDomain, "clip bound must be positive");
  ContingencyTable out = t;
  const double norm = table_l2_norm(t);
  if (norm > clip_bound) {
    const double f = clip_bound / norm;
    out.counts *= f;
  }
  return out;
}

// epsilon = (1 / sigma) * sqrt(2 ln(1.25 / delta)); the per-release privacy
// cost of the clipped Gaussian release.
inline double epsilon_for(double sigma, double delta) {
  check(sigma > 0.0, Error::Kind::kDomain, "sigma must be positive");
  check(delta > 0.0 && delta < 1.0, Error::Kind::kDomain, "delta must lie in (0,1)");
  return std::sqrt(2.0 * std::log(1.25 / delta)) / sigma;
}

struct DpReleaseRecord {
  double clip_bound = 0.0;
  double sigma = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  int release_index = 0;
  std::string what;
};

// Release cap with advisory cumulative epsilon.  The naive sum is reported
// as-is; no composition accountant is applied beyond the cap.
class BudgetLedger {
 public:
  explicit BudgetLedger(int max_releases) : max_releases_(max_releases) {}

  int max_releases() const { return max_releases_; }
  int used() const { return static_cast<int>(records_.size()); }
  bool can_release() const { return used() < max_releases_; }
  const std::vector<DpReleaseRecord>& records() const { return records_; }

  double cumulative_epsilon() const {
    double e = 0.0;
    for (const auto& r : records_) e += r.epsilon;
    return e;
  }

  const DpReleaseRecord& charge(double clip_bound, double sigma, double delta, const std::string& what) {
    check(can_release(), Error::Kind::kBudget,
          "privacy ledger exhausted: " + std::to_string(used()) + "/" +
              std::to_string(max_releases_) + " releases used");
    DpReleaseRecord rec;
    rec.clip_bound = clip_bound;
    rec.sigma = sigma;
    rec.delta = delta;
    rec.epsilon = sigma > 0.0 ? epsilon_for(sigma, delta) : 0.0;  // sigma=0 only in test mode
    rec.release_index = used();
    rec.what = what;
    records_.push_back(rec);
    return records_.back();
  }

 private:
  int max_releases_;
  std::vector<DpReleaseRecord> records_;
};

struct GaussianRelease {
  ContingencyTable noisy;
  DpReleaseRecord record;
};

// Adds N(0, (sigma * S)^2) per cell to a clipped table and charges the
// ledger.  sigma = 0 is the deterministic test mode.
inline GaussianRelease gaussian_release(const ContingencyTable& clipped, double sigma,
                                        double clip_bound, double delta, RngStream& rng,
                                        BudgetLedger& ledger, const std::string& what = "") {
  check(sigma >= 0.0, Error::Kind::kDomain, "sigma must be >= 0");
  GaussianRelease out;
  out.record = ledger.charge(clip_bound, sigma, delta,
                             what.empty() ? "feature_" + std::to_string(clipped.feature) : what);
  out.noisy = clipped;
  out.noisy.post_release = true;
  const double stddev = sigma * clip_bound;
  if (stddev > 0.0)
    for (int i = 0; i < out.noisy.counts.rows(); ++i)
      for (int j = 0; j < out.noisy.counts.cols(); ++j) out.noisy.counts(i, j) += rng.normal(0.0, stddev);
  return out;
}

// 90th percentile of raw table norms; the default clip bound is frozen from
// these before any release happens.
inline double default_clip_bound(const std::vector<ContingencyTable>& raw_tables) {
  check(!raw_tables.empty(), Error::Kind::kShape, "no tables to calibrate a clip bound from");
  std::vector<double> norms;
  norms.reserve(raw_tables.size());
  for (const auto& t : raw_tables) norms.push_back(table_l2_norm(t));
  std::sort(norms.begin(), norms.end());
  const std::size_t idx = std::min(norms.size() - 1,
                                   static_cast<std::size_t>(0.90 * static_cast<double>(norms.size())));
  return std::max(norms[idx], 1e-9);
}

// ---------------------------------------------------------------------------
// Secure aggregation (in-process simulation, exact zero-sum masks)

// Payloads are quantized to 2^-32 fixed point and masked with pairwise
// antisymmetric uniform words; cancellation is exact on the u64 ring, so the
// combined sum differs from the direct sum only by the quantization of each
// party's payload (|error| <= m * 2^-33 per coordinate).  In real units the
// masks are uniform over [-2^31, 2^31).
struct MaskedShare {
  int party = 0;
  int round = 0;
  std::vector<std::uint64_t> payload;
};

struct SecaggResult {
  std::vector<MaskedShare> shares;
  std::vector<double> combined;
};

namespace secagg_detail {

constexpr double kScale = 4294967296.0;  // 2^32
constexpr double kMaxMagnitude = 1048576.0;  // 2^20; keeps m-party sums clear of the ring modulus

inline std::uint64_t encode(double v) {
  check(std::isfinite(v) && std::fabs(v) < kMaxMagnitude, Error::Kind::kDomain,
        "secagg payload magnitude exceeds fixed-point range");
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(v * kScale)));
}

inline double decode(std::uint64_t w) {
  return static_cast<double>(static_cast<std::int64_t>(w)) / kScale;
}

}  // namespace secagg_detail

inline std::vector<double> secagg_combine(const std::vector<MaskedShare>& shares) {
  check(!shares.empty(), Error::Kind::kShape, "no shares to combine");
  std::vector<std::uint64_t> acc(shares[0].payload.size(), 0);
  for (const auto& sh : shares) {
    check(sh.payload.size() == acc.size(), Error::Kind::kShape, "share length mismatch");
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += sh.payload[k];  // u64 wraparound
  }
  std::vector<double> out(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = secagg_detail::decode(acc[k]);
  return out;
}

inline SecaggResult secagg_round(const std::vector<std::vector<double>>& vectors, RngStream& rng,
                                 int round_id = 0) {
  const int m = static_cast<int>(vectors.size());
  check(m >= 2, Error::Kind::kDomain, "secure aggregation needs at least two parties");
  const std::size_t dim = vectors[0].size();
  SecaggResult out;
  out.shares.resize(static_cast<std::size_t>(m));
  for (int c = 0; c < m; ++c) {
    check(vectors[static_cast<std::size_t>(c)].size() == dim, Error::Kind::kShape,
          "secagg vector length mismatch");
    out.shares[static_cast<std::size_t>(c)].party = c;
    out.shares[static_cast<std::size_t>(c)].round = round_id;
    out.shares[static_cast<std::size_t>(c)].payload.resize(dim);
    for (std::size_t k = 0; k < dim; ++k)
      out.shares[static_cast<std::size_t>(c)].payload[k] =
          secagg_detail::encode(vectors[static_cast<std::size_t>(c)][k]);
  }
  // One mask word per unordered pair, added to the lower index and
  // subtracted from the higher; the ring sum of all masks is exactly zero.
  for (int c = 0; c < m; ++c)
    for (int c2 = c + 1; c2 < m; ++c2)
      for (std::size_t k = 0; k < dim; ++k) {
        const std::uint64_t r = rng.next_u64();
        out.shares[static_cast<std::size_t>(c)].payload[k] += r;
        out.shares[static_cast<std::size_t>(c2)].payload[k] -= r;
      }
  out.combined = secagg_combine(out.shares);
  return out;
}

// ---------------------------------------------------------------------------
// DP sketch embedding of the protected attribute

// Per-entity low-dimensional encoding of s.  Noise is added once at the
// group-statistic level per release, so all entities of a group share an
// embedding and toggling s -> s' is a pure row substitution.
struct SketchEmbedding {
  Matrix group_embed;  // num_groups x dims
  int dims = 0;
  double sigma = 0.0;

  std::vector<double> embed(int group) const {
    check(group >= 0 && group < group_embed.rows(), Error::Kind::kDomain, "group out of range");
    std::vector<double> v(static_cast<std::size_t>(dims));
    for (int j = 0; j < dims; ++j) v[static_cast<std::size_t>(j)] = group_embed(group, j);
    return v;
  }

  Matrix embed_rows(const std::vector<int>& groups) const {
    Matrix out(static_cast<int>(groups.size()), dims);
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < dims; ++j) out(i, j) = group_embed(groups[static_cast<std::size_t>(i)], j);
    return out;
  }
};

inline SketchEmbedding dp_sketch_embedding(int num_groups, double sigma, int dims, double delta,
                                           RngStream& rng, BudgetLedger& ledger) {
  check(num_groups >= 2, Error::Kind::kDomain, "sketch needs at least two groups");
  check(dims >= 1, Error::Kind::kDomain, "sketch dims must be >= 1");
  ledger.charge(1.0, sigma, delta, "sketch_embedding");
  SketchEmbedding sk;
  sk.dims = dims;
  sk.sigma = sigma;
  // Fixed projection of the (noisy) one-hot group indicator.  The projection
  // is drawn from a constant-seeded stream so embeddings are comparable
  // across runs; the release noise uses the caller's stream.
  RngStream proj(RngStream::derive(0x5CC0FF, "sketch/projection"));
  Matrix pi(num_groups, dims);
  for (int g = 0; g < num_groups; ++g)
    for (int j = 0; j < dims; ++j) pi(g, j) = proj.normal();
  Matrix onehot(num_groups, num_groups);
  for (int g = 0; g < num_groups; ++g) {
    onehot(g, g) = 1.0;
    if (sigma > 0.0)
      for (int k = 0; k < num_groups; ++k) onehot(g, k) += rng.normal(0.0, sigma);
  }
  sk.group_embed = matmul(onehot, pi);
  return sk;
}

// ---------------------------------------------------------------------------
// Audit log: append-only line-delimited records

class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(std::string path) : path_(std::move(path)) {}

  void append(const std::string& json_line) {
    lines_.push_back(json_line);
    if (!path_.empty()) {
      std::ofstream f(path_, std::ios::app);
      check(f.good(), Error::Kind::kIo, "cannot append to audit log " + path_);
      f << json_line << "\n";
    }
  }

  void append_release(const DpReleaseRecord& rec, int mask_version) {
    append("{\"event\":\"dp_release\",\"index\":" + std::to_string(rec.release_index) +
           ",\"what\":\"" + rec.what + "\",\"S\":" + std::to_string(rec.clip_bound) +
           ",\"sigma\":" + std::to_string(rec.sigma) + ",\"delta\":" + std::to_string(rec.delta) +
           ",\"epsilon\":" + std::to_string(rec.epsilon) +
           ",\"mask_version\":" + std::to_string(mask_version) + "}");
  }

  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::string path_;
  std::vector<std::string> lines_;
};

}  // namespace sccvfl::dp

#endif  // SCCVFL_PRIVACY_HPP_
