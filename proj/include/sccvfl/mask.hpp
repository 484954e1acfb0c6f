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

#ifndef SCCVFL_MASK_HPP_
#define SCCVFL_MASK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sccvfl/dataset.hpp"
#include "sccvfl/error.hpp"
#include "sccvfl/matrix.hpp"
#include "sccvfl/privacy.hpp"

namespace sccvfl::discovery {

// ---------------------------------------------------------------------------
// Scores

struct FeatureScore {
  int feature = -1;  // global encoded column index
  int party = -1;
  double delta = 0.0;     // signed probability gap (or risk difference)
  double hsic = 0.0;      // nonnegative dependence score
  double combined = 0.0;  // filled by combine_scores
  bool available = true;
  double p_value = 0.0;   // permutation p-value on hsic; 0 when not computed
};

using ScoreSet = std::vector<FeatureScore>;

// Signed probability gap and a discrete-kernel HSIC from a (possibly noisy)
// group-by-bin table.  Negative noisy cells are clamped to zero before
// normalization; a group row with nonpositive total marks the score
// unavailable.
struct TableScore {
  double delta = 0.0;
  double hsic = 0.0;
  bool available = true;
};

inline TableScore score_from_table(const dp::ContingencyTable& table) {
  const int groups = table.counts.rows(), k = table.counts.cols();
  TableScore out;
  Matrix pos(groups, k);
  std::vector<double> row_total(static_cast<std::size_t>(groups), 0.0);
  double total = 0.0;
  for (int g = 0; g < groups; ++g)
    for (int b = 0; b < k; ++b) {
      pos(g, b) = std::max(0.0, table.counts(g, b));
      row_total[static_cast<std::size_t>(g)] += pos(g, b);
      total += pos(g, b);
    }
  for (int g = 0; g < groups; ++g)
    if (row_total[static_cast<std::size_t>(g)] <= 0.0) {
      out.available = false;
      return out;
    }
  // delta: max_k |P(bin k | g=1) - P(bin k | g=0)|, carrying the sign of the
  // maximizing gap; ties break toward the larger signed value, then the
  // lower bin index.
  double best_abs = -1.0, best_signed = 0.0;
  for (int b = 0; b < k; ++b) {
    const double gap = pos(1, b) / row_total[1] - pos(0, b) / row_total[0];
    const double a = std::fabs(gap);
    if (a > best_abs + 1e-15 || (std::fabs(a - best_abs) <= 1e-15 && gap > best_signed)) {
      best_abs = a;
      best_signed = gap;
    }
  }
  out.delta = best_signed;
  // Discrete-kernel HSIC of the group and bin indicators implied by the
  // table: sum of squared deviations of the joint from the product of
  // marginals.
  double h = 0.0;
  for (int g = 0; g < groups; ++g)
    for (int b = 0; b < k; ++b) {
      double col_total = 0.0;
      for (int gg = 0; gg < groups; ++gg) col_total += pos(gg, b);
      const double joint = pos(g, b) / total;
      const double indep = (row_total[static_cast<std::size_t>(g)] / total) * (col_total / total);
      h += (joint - indep) * (joint - indep);
    }
  out.hsic = h;
  return out;
}

// Permutation p-value for the table HSIC: the group labels are shuffled
// against the bins and the statistic recomputed from the raw permuted table.
inline double hsic_permutation_pvalue(const std::vector<int>& bins, const std::vector<int>& s, int k,
                                      double observed_hsic, int n_perm, RngStream& rng) {
  std::vector<int> perm = s;
  int at_least = 0;
  for (int p = 0; p < n_perm; ++p) {
    rng.shuffle(perm.begin(), perm.end());
    const TableScore ts = score_from_table(dp::build_contingency(bins, perm, k));
    if (ts.hsic >= observed_hsic) ++at_least;
  }
  return (1.0 + at_least) / (1.0 + n_perm);
}

// Default combination: |delta| + hsic after per-party min-max normalization,
// so both components contribute on comparable scales.  Unavailable features
// rank last.
inline void combine_scores(ScoreSet* scores) {
  std::map<int, std::vector<FeatureScore*>> by_party;
  for (auto& sc : *scores) by_party[sc.party].push_back(&sc);
  for (auto& [party, list] : by_party) {
    double dmin = 1e300, dmax = -1e300, hmin = 1e300, hmax = -1e300;
    for (auto* sc : list) {
      if (!sc->available) continue;
      dmin = std::min(dmin, std::fabs(sc->delta));
      dmax = std::max(dmax, std::fabs(sc->delta));
      hmin = std::min(hmin, sc->hsic);
      hmax = std::max(hmax, sc->hsic);
    }
    for (auto* sc : list) {
      if (!sc->available) {
        sc->combined = -1.0;
        continue;
      }
      const double nd = dmax > dmin ? (std::fabs(sc->delta) - dmin) / (dmax - dmin) : 0.0;
      const double nh = hmax > hmin ? (sc->hsic - hmin) / (hmax - hmin) : 0.0;
      sc->combined = nd + nh;
    }
  }
}

// ---------------------------------------------------------------------------
// Masks

struct PartyMask {
  std::vector<int> n;  // non-descendants (global encoded column indices)
  std::vector<int> m;  // mediators
  std::vector<int> p;  // proxies, a subset of m

  std::vector<int> editable() const {  // mediators that are not proxies
    std::vector<int> out;
    for (int c : m)
      if (std::find(p.begin(), p.end(), c) == p.end()) out.push_back(c);
    return out;
  }
};

struct FeatureMask {
  std::vector<PartyMask> parties;
  int version = 1;
  double rho_m = 0.60;
  double rho_p = 0.50;
  std::uint64_t score_hash = 0;

  std::vector<int> all_mediators() const {
    std::vector<int> out;
    for (const auto& pm : parties) out.insert(out.end(), pm.m.begin(), pm.m.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<int> all_editable() const {
    std::vector<int> out;
    for (const auto& pm : parties) {
      auto e = pm.editable();
      out.insert(out.end(), e.begin(), e.end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void validate(const data::VerticalLayout& layout) const {
    check(parties.size() == layout.party_cols.size(), Error::Kind::kContract,
          "mask party count mismatch");
    for (std::size_t p = 0; p < parties.size(); ++p) {
      std::vector<int> all = parties[p].n;
      all.insert(all.end(), parties[p].m.begin(), parties[p].m.end());
      std::sort(all.begin(), all.end());
      std::vector<int> cols = layout.party_cols[p];
      std::sort(cols.begin(), cols.end());
      check(all == cols, Error::Kind::kContract, "mask N+M does not partition party columns");
      for (int c : parties[p].p)
        check(std::find(parties[p].m.begin(), parties[p].m.end(), c) != parties[p].m.end(),
              Error::Kind::kContract, "proxy outside mediator set");
    }
  }
};

inline std::uint64_t score_snapshot_hash(const ScoreSet& scores) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (const auto& sc : scores) {
    mix(static_cast<std::uint64_t>(sc.feature));
    std::uint64_t bits;
    double c = sc.combined;
    __builtin_memcpy(&bits, &c, sizeof(bits));
    mix(bits);
  }
  return h;
}

namespace detail {

// Features of one party ordered by descending combined score, ties broken by
// ascending feature index (stable, reproducible ranking).
inline std::vector<const FeatureScore*> ranked(const ScoreSet& scores, int party) {
  std::vector<const FeatureScore*> list;
  for (const auto& sc : scores)
    if (sc.party == party) list.push_back(&sc);
  std::sort(list.begin(), list.end(), [](const FeatureScore* a, const FeatureScore* b) {
    if (a->combined != b->combined) return a->combined > b->combined;
    return a->feature < b->feature;
  });
  return list;
}

}  // namespace detail

// M = top ceil(rho_m * d_p) by combined score; P = top ceil(rho_p * |M|)
// within M; N = complement.
inline FeatureMask tripartition(const ScoreSet& scores, double rho_m, double rho_p,
                                const data::VerticalLayout& layout) {
  check(rho_m > 0.0 && rho_m <= 1.0 && rho_p > 0.0 && rho_p <= 1.0, Error::Kind::kDomain,
        "mask fractions must lie in (0,1]");
  FeatureMask mask;
  mask.rho_m = rho_m;
  mask.rho_p = rho_p;
  mask.score_hash = score_snapshot_hash(scores);
  for (int party = 0; party < layout.parties(); ++party) {
    auto list = detail::ranked(scores, party);
    PartyMask pm;
    const int d_p = static_cast<int>(list.size());
    const int m_count = d_p == 0 ? 0 : static_cast<int>(std::ceil(rho_m * d_p));
    const int p_count = m_count == 0 ? 0 : static_cast<int>(std::ceil(rho_p * m_count));
    for (int r = 0; r < d_p; ++r) {
      if (r < m_count) {
        pm.m.push_back(list[static_cast<std::size_t>(r)]->feature);
        if (r < p_count) pm.p.push_back(list[static_cast<std::size_t>(r)]->feature);
      } else {
        pm.n.push_back(list[static_cast<std::size_t>(r)]->feature);
      }
    }
    std::sort(pm.n.begin(), pm.n.end());
    std::sort(pm.m.begin(), pm.m.end());
    std::sort(pm.p.begin(), pm.p.end());
    mask.parties.push_back(std::move(pm));
  }
  mask.validate(layout);
  return mask;
}

// ---------------------------------------------------------------------------
// Refresh with hysteresis and FDR control

struct RefreshPolicy {
  int interval = 50;              // epochs between refreshes
  double hysteresis_margin = 0.05;  // fraction of d_p a feature must cross
  double fdr_q = 0.10;            // Benjamini-Hochberg target rate

  void validate() const {
    check(interval >= 1, Error::Kind::kDomain, "refresh interval must be >= 1");
    check(hysteresis_margin >= 0.0, Error::Kind::kDomain, "hysteresis margin must be >= 0");
    check(fdr_q > 0.0 && fdr_q < 1.0, Error::Kind::kDomain, "fdr_q must lie in (0,1)");
  }
};

// Benjamini-Hochberg: returns, per score entry, whether its p-value survives
// at level q.
inline std::vector<bool> benjamini_hochberg(const ScoreSet& scores, double q) {
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < scores.size(); ++i) order.push_back({scores[i].p_value, i});
  std::sort(order.begin(), order.end());
  const double m = static_cast<double>(order.size());
  std::size_t cut = 0;  // number of smallest p-values accepted
  for (std::size_t r = 0; r < order.size(); ++r)
    if (order[r].first <= q * (static_cast<double>(r) + 1.0) / m) cut = r + 1;
  std::vector<bool> keep(scores.size(), false);
  for (std::size_t r = 0; r < cut; ++r) keep[order[r].second] = true;
  return keep;
}

struct RefreshOutcome {
  FeatureMask mask;
  std::vector<std::string> changes;  // human-readable audit entries
};

// A feature changes role only when its new rank crosses the role boundary by
// more than hysteresis_margin * d_p positions; promotions into M must also
// survive Benjamini-Hochberg on the HSIC permutation p-values.
inline RefreshOutcome refresh_masks(const FeatureMask& old_mask, const ScoreSet& new_scores,
                                    const RefreshPolicy& policy, const data::VerticalLayout& layout) {
  policy.validate();
  const std::vector<bool> fdr_keep = benjamini_hochberg(new_scores, policy.fdr_q);
  std::map<int, bool> significant;
  for (std::size_t i = 0; i < new_scores.size(); ++i)
    significant[new_scores[i].feature] = fdr_keep[i];

  RefreshOutcome out;
  out.mask = old_mask;
  out.mask.version = old_mask.version + 1;
  out.mask.score_hash = score_snapshot_hash(new_scores);

  for (int party = 0; party < layout.parties(); ++party) {
    auto list = detail::ranked(new_scores, party);
    const int d_p = static_cast<int>(list.size());
    if (d_p == 0) continue;
    std::map<int, int> rank_of;  // feature -> 1-based rank
    for (int r = 0; r < d_p; ++r) rank_of[list[static_cast<std::size_t>(r)]->feature] = r + 1;

    PartyMask& pm = out.mask.parties[static_cast<std::size_t>(party)];
    const int m_boundary = static_cast<int>(std::ceil(old_mask.rho_m * d_p));
    const double h = policy.hysteresis_margin * d_p;

    std::vector<int> new_m, new_n;
    for (int f : pm.m) {
      const double r = rank_of.at(f);
      if (r > m_boundary + h)
        new_n.push_back(f);  // demoted
      else
        new_m.push_back(f);
    }
    for (int f : pm.n) {
      const double r = rank_of.at(f);
      if (r <= m_boundary - h && significant[f])
        new_m.push_back(f);  // promoted, FDR-approved candidate
      else
        new_n.push_back(f);
    }
    for (int f : pm.m)
      if (std::find(new_m.begin(), new_m.end(), f) == new_m.end())
        out.changes.push_back("party " + std::to_string(party) + ": demoted " + std::to_string(f) +
                              " M->N");
    for (int f : new_m)
      if (std::find(pm.m.begin(), pm.m.end(), f) == pm.m.end())
        out.changes.push_back("party " + std::to_string(party) + ": promoted " + std::to_string(f) +
                              " N->M");

    // Proxies: same hysteresis on the within-M ranking; P stays inside M.
    std::vector<int> m_sorted = new_m;
    std::sort(m_sorted.begin(), m_sorted.end(), [&](int a, int b) {
      const int ra = rank_of.at(a), rb = rank_of.at(b);
      return ra != rb ? ra < rb : a < b;
    });
    const int p_boundary = m_sorted.empty()
                               ? 0
                               : static_cast<int>(std::ceil(old_mask.rho_p * static_cast<double>(m_sorted.size())));
    const double hp = policy.hysteresis_margin * static_cast<double>(m_sorted.size());
    std::vector<int> new_p;
    for (std::size_t r = 0; r < m_sorted.size(); ++r) {
      const int f = m_sorted[r];
      const bool was_p = std::find(pm.p.begin(), pm.p.end(), f) != pm.p.end();
      const double rank = static_cast<double>(r) + 1.0;
      if (was_p) {
        if (rank <= p_boundary + hp) new_p.push_back(f);
      } else {
        if (rank <= p_boundary - hp) new_p.push_back(f);
      }
    }
    std::sort(new_n.begin(), new_n.end());
    std::sort(new_m.begin(), new_m.end());
    std::sort(new_p.begin(), new_p.end());
    pm.n = std::move(new_n);
    pm.m = std::move(new_m);
    pm.p = std::move(new_p);
  }
  out.mask.validate(layout);
  return out;
}

// ---------------------------------------------------------------------------
// Interventional validation

struct ValidationTolerances {
  double tol_identity = 1e-6;    // max |delta| allowed on N (and P) coordinates
  double tol_response = 1e-3;    // min mean |delta| required of an editable mediator
};

struct CoordinateDelta {
  int feature = -1;
  double mean_abs = 0.0;
  double max_abs = 0.0;
};

struct ValidationReport {
  bool passed = true;
  double max_n_violation = 0.0;
  double mean_m_response = 0.0;
  std::vector<CoordinateDelta> per_coordinate;
  std::vector<int> violated_n;         // fixed coordinates the generator touched
  std::vector<int> unresponsive_m;     // editable mediators that failed to respond
  std::vector<std::string> revisions;
  bool report_only = false;
};

// Toggles the target embedding, generates counterfactuals through the
// supplied callback, and checks identity on N (and pass-through P) plus
// responsiveness of editable mediators.  When `revise` is set, unresponsive
// editable mediators are demoted to N in the returned mask.
inline std::pair<ValidationReport, FeatureMask> interventional_validate(
    const FeatureMask& mask, const std::function<Matrix(const Matrix&)>& generator,
    const Matrix& batch, const ValidationTolerances& tol, const data::VerticalLayout& layout,
    bool revise = true) {
  ValidationReport report;
  FeatureMask revised = mask;
  if (!generator) {
    report.report_only = true;
    report.passed = false;
    return {report, revised};
  }
  const Matrix cf = generator(batch);
  check(cf.rows() == batch.rows() && cf.cols() == batch.cols(), Error::Kind::kShape,
        "generator changed batch shape");
  std::vector<CoordinateDelta> deltas(static_cast<std::size_t>(batch.cols()));
  for (int j = 0; j < batch.cols(); ++j) {
    deltas[static_cast<std::size_t>(j)].feature = j;
    double sum = 0.0, mx = 0.0;
    for (int i = 0; i < batch.rows(); ++i) {
      const double d = std::fabs(cf(i, j) - batch(i, j));
      sum += d;
      mx = std::max(mx, d);
    }
    deltas[static_cast<std::size_t>(j)].mean_abs = sum / batch.rows();
    deltas[static_cast<std::size_t>(j)].max_abs = mx;
  }
  report.per_coordinate = deltas;

  double resp_sum = 0.0;
  int resp_count = 0;
  for (std::size_t party = 0; party < mask.parties.size(); ++party) {
    const PartyMask& pm = mask.parties[party];
    std::vector<int> fixed = pm.n;
    for (int c : pm.p) fixed.push_back(c);  // proxies pass through unchanged
    for (int c : fixed) {
      const double mx = deltas[static_cast<std::size_t>(c)].max_abs;
      report.max_n_violation = std::max(report.max_n_violation, mx);
      if (mx > tol.tol_identity) {
        report.violated_n.push_back(c);
        report.passed = false;
      }
    }
    for (int c : pm.editable()) {
      const double mean = deltas[static_cast<std::size_t>(c)].mean_abs;
      resp_sum += mean;
      ++resp_count;
      if (mean < tol.tol_response) {
        report.unresponsive_m.push_back(c);
        if (revise) {
          PartyMask& rpm = revised.parties[party];
          rpm.m.erase(std::remove(rpm.m.begin(), rpm.m.end(), c), rpm.m.end());
          rpm.n.push_back(c);
          std::sort(rpm.n.begin(), rpm.n.end());
          report.revisions.push_back("demoted unresponsive mediator " + std::to_string(c) + " to N");
        }
      }
    }
  }
  report.mean_m_response = resp_count > 0 ? resp_sum / resp_count : 0.0;
  if (!report.unresponsive_m.empty()) report.passed = false;
  if (revise) revised.validate(layout);
  return {report, revised};
}

// ---------------------------------------------------------------------------
// Predictor-based score variant (risk difference with vs. without z_s)

namespace detail {

// Ridge regression via normal equations; the systems here are tiny.
inline std::vector<double> ridge_fit(const Matrix& a, const std::vector<double>& b, double lambda) {
  const int d = a.cols();
  Matrix ata = matmul_tn(a, a);
  for (int j = 0; j < d; ++j) ata(j, j) += lambda;
  std::vector<double> atb(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < d; ++j) atb[static_cast<std::size_t>(j)] += a(i, j) * b[static_cast<std::size_t>(i)];
  // Gaussian elimination with partial pivoting.
  Matrix aug = ata;
  std::vector<double> x = atb;
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r)
      if (std::fabs(aug(r, col)) > std::fabs(aug(piv, col))) piv = r;
    if (piv != col) {
      for (int c = 0; c < d; ++c) std::swap(aug(col, c), aug(piv, c));
      std::swap(x[static_cast<std::size_t>(col)], x[static_cast<std::size_t>(piv)]);
    }
    const double diag = aug(col, col);
    check(std::fabs(diag) > 1e-300, Error::Kind::kDomain, "singular ridge system");
    for (int r = col + 1; r < d; ++r) {
      const double f = aug(r, col) / diag;
      if (f == 0.0) continue;
      for (int c = col; c < d; ++c) aug(r, c) -= f * aug(col, c);
      x[static_cast<std::size_t>(r)] -= f * x[static_cast<std::size_t>(col)];
    }
  }
  for (int col = d - 1; col >= 0; --col) {
    double v = x[static_cast<std::size_t>(col)];
    for (int c = col + 1; c < d; ++c) v -= aug(col, c) * x[static_cast<std::size_t>(c)];
    x[static_cast<std::size_t>(col)] = v / aug(col, col);
  }
  return x;
}

inline double heldout_mse(const Matrix& train_a, const std::vector<double>& train_b,
                          const Matrix& test_a, const std::vector<double>& test_b) {
  const auto w = ridge_fit(train_a, train_b, 1e-3);
  double mse = 0.0;
  for (int i = 0; i < test_a.rows(); ++i) {
    double pred = 0.0;
    for (int j = 0; j < test_a.cols(); ++j) pred += test_a(i, j) * w[static_cast<std::size_t>(j)];
    const double e = pred - test_b[static_cast<std::size_t>(i)];
    mse += e * e;
  }
  return mse / test_a.rows();
}

}  // namespace detail

// Held-out risk difference per in-party coordinate: risk(with z_s) minus
// risk(without).  Negative values mean the sketch helps predict the feature.
// Both predictors share the same (linear ridge) architecture.
inline std::vector<double> score_predictor_variant(const Matrix& party_train, const Matrix& party_test,
                                                   const Matrix& zs_train, const Matrix& zs_test) {
  check(party_train.cols() == party_test.cols(), Error::Kind::kShape, "train/test width mismatch");
  check(party_train.rows() == zs_train.rows() && party_test.rows() == zs_test.rows(),
        Error::Kind::kShape, "z_s row mismatch");
  const int d = party_train.cols();
  std::vector<double> deltas(static_cast<std::size_t>(d), 0.0);
  for (int j = 0; j < d; ++j) {
    std::vector<int> others;
    for (int c = 0; c < d; ++c)
      if (c != j) others.push_back(c);
    std::vector<double> target_tr(static_cast<std::size_t>(party_train.rows()));
    std::vector<double> target_te(static_cast<std::size_t>(party_test.rows()));
    double mn = 1e300, mx = -1e300;
    for (int i = 0; i < party_train.rows(); ++i) {
      target_tr[static_cast<std::size_t>(i)] = party_train(i, j);
      mn = std::min(mn, party_train(i, j));
      mx = std::max(mx, party_train(i, j));
    }
    if (mx - mn < 1e-12) continue;  // degenerate target: delta stays 0
    for (int i = 0; i < party_test.rows(); ++i) target_te[static_cast<std::size_t>(i)] = party_test(i, j);
    Matrix base_tr = party_train.take_cols(others);
    Matrix base_te = party_test.take_cols(others);
    // Bias column.
    Matrix ones_tr(base_tr.rows(), 1, 1.0), ones_te(base_te.rows(), 1, 1.0);
    const Matrix without_tr = hconcat({base_tr, ones_tr});
    const Matrix without_te = hconcat({base_te, ones_te});
    const Matrix with_tr = hconcat({base_tr, zs_train, ones_tr});
    const Matrix with_te = hconcat({base_te, zs_test, ones_te});
    const double risk_without = detail::heldout_mse(without_tr, target_tr, without_te, target_te);
    const double risk_with = detail::heldout_mse(with_tr, target_tr, with_te, target_te);
    deltas[static_cast<std::size_t>(j)] = risk_with - risk_without;
  }
  return deltas;
}

// ---------------------------------------------------------------------------
// Machine-readable mask file

inline nlohmann::json mask_to_json(const FeatureMask& mask, const data::VerticalLayout& layout,
                                   const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  j["version"] = mask.version;
  j["rho_m"] = mask.rho_m;
  j["rho_p"] = mask.rho_p;
  j["score_hash"] = mask.score_hash;
  auto names_of = [&feature_names](const std::vector<int>& cols) {
    std::vector<std::string> out;
    for (int c : cols) out.push_back(feature_names[static_cast<std::size_t>(c)]);
    return out;
  };
  nlohmann::json parties = nlohmann::json::object();
  for (std::size_t p = 0; p < mask.parties.size(); ++p) {
    nlohmann::json pj;
    pj["N"] = names_of(mask.parties[p].n);
    pj["M"] = names_of(mask.parties[p].m);
    pj["P"] = names_of(mask.parties[p].p);
    parties[layout.party_names[p]] = pj;
  }
  j["parties"] = parties;
  return j;
}

inline FeatureMask mask_from_json(const nlohmann::json& j, const data::VerticalLayout& layout,
                                  const std::vector<std::string>& feature_names) {
  FeatureMask mask;
  mask.version = j.at("version").get<int>();
  mask.rho_m = j.at("rho_m").get<double>();
  mask.rho_p = j.at("rho_p").get<double>();
  mask.score_hash = j.at("score_hash").get<std::uint64_t>();
  std::map<std::string, int> col_of;
  for (std::size_t c = 0; c < feature_names.size(); ++c) col_of[feature_names[c]] = static_cast<int>(c);
  auto cols_of = [&col_of](const nlohmann::json& names) {
    std::vector<int> out;
    for (const auto& n : names) out.push_back(col_of.at(n.get<std::string>()));
    std::sort(out.begin(), out.end());
    return out;
  };
  mask.parties.resize(layout.party_cols.size());
  for (std::size_t p = 0; p < layout.party_cols.size(); ++p) {
    const auto& pj = j.at("parties").at(layout.party_names[p]);
    mask.parties[p].n = cols_of(pj.at("N"));
    mask.parties[p].m = cols_of(pj.at("M"));
    mask.parties[p].p = cols_of(pj.at("P"));
  }
  mask.validate(layout);
  return mask;
}

}  // namespace sccvfl::discovery

#endif  // SCCVFL_MASK_HPP_
