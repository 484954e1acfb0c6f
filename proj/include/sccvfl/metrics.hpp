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

#ifndef SCCVFL_METRICS_HPP_
#define SCCVFL_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/matrix.hpp"
#include "sccvfl/nn.hpp"

namespace sccvfl::eval {

struct MetricsRecord {
  double accuracy = 0.0;
  double logloss = 0.0;
  double scg = 0.0;
  double fr = 0.0;       // percent
  double dp_diff = 0.0;
  double eo_gap = 0.0;
  std::uint64_t seed = 0;
};

struct UtilityMetrics {
  double accuracy = 0.0;
  double logloss = 0.0;
};

inline UtilityMetrics utility_metrics(const Matrix& logits, const std::vector<int>& y) {
  check(logits.rows() == static_cast<int>(y.size()), Error::Kind::kShape, "utility batch mismatch");
  UtilityMetrics out;
  const Matrix probs = softmax_rows(logits);
  const std::vector<int> pred = argmax_rows(logits);
  for (int i = 0; i < logits.rows(); ++i) {
    if (pred[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(i)]) out.accuracy += 1.0;
    out.logloss -= std::log(std::max(probs(i, y[static_cast<std::size_t>(i)]), 1e-12));
  }
  out.accuracy /= logits.rows();
  out.logloss /= logits.rows();
  return out;
}

// Mean l1 logit gap between the original and counterfactual passes.
inline double scg(const Matrix& logits, const Matrix& logits_cf) {
  check(logits.same_shape(logits_cf), Error::Kind::kShape, "scg shape mismatch");
  double s = 0.0;
  for (int i = 0; i < logits.rows(); ++i)
    for (int j = 0; j < logits.cols(); ++j) s += std::fabs(logits(i, j) - logits_cf(i, j));
  return s / logits.rows();
}

// Percent of rows whose predicted label changes under the counterfactual.
inline double flip_rate(const std::vector<int>& labels, const std::vector<int>& labels_cf) {
  check(labels.size() == labels_cf.size(), Error::Kind::kShape, "flip_rate length mismatch");
  check(!labels.empty(), Error::Kind::kShape, "flip_rate on empty batch");
  double flips = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) flips += labels[i] != labels_cf[i];
  return 100.0 * flips / static_cast<double>(labels.size());
}

struct GroupFairness {
  double dp_diff = 0.0;
  double eo_gap = 0.0;
  std::vector<std::string> flags;  // groups with undefined rates, excluded
};

// Demographic-parity difference (max pairwise gap in positive prediction
// rates) and equalized-odds gap (max pairwise gap over TPR and FPR).  The
// positive class is class 1.
inline GroupFairness group_fairness(const std::vector<int>& pred, const std::vector<int>& y,
                                    const std::vector<int>& s) {
  check(pred.size() == y.size() && pred.size() == s.size(), Error::Kind::kShape,
        "group_fairness length mismatch");
  int num_groups = 0;
  for (int g : s) num_groups = std::max(num_groups, g + 1);
  check(num_groups >= 2, Error::Kind::kShape, "group fairness needs at least two groups");
  GroupFairness out;
  std::vector<double> pos_rate, tpr, fpr;
  std::vector<bool> tpr_ok, fpr_ok;
  for (int g = 0; g < num_groups; ++g) {
    int n = 0, npos = 0, tp = 0, p = 0, fp = 0, neg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != g) continue;
      ++n;
      npos += pred[i] == 1;
      if (y[i] == 1) {
        ++p;
        tp += pred[i] == 1;
      } else {
        ++neg;
        fp += pred[i] == 1;
      }
    }
    pos_rate.push_back(n > 0 ? static_cast<double>(npos) / n : 0.0);
    tpr.push_back(p > 0 ? static_cast<double>(tp) / p : 0.0);
    fpr.push_back(neg > 0 ? static_cast<double>(fp) / neg : 0.0);
    tpr_ok.push_back(p > 0);
    fpr_ok.push_back(neg > 0);
    if (p == 0) out.flags.push_back("group " + std::to_string(g) + " has no positives; TPR excluded");
    if (neg == 0) out.flags.push_back("group " + std::to_string(g) + " has no negatives; FPR excluded");
  }
  for (int a = 0; a < num_groups; ++a)
    for (int b = a + 1; b < num_groups; ++b) {
      out.dp_diff = std::max(out.dp_diff, std::fabs(pos_rate[static_cast<std::size_t>(a)] -
                                                    pos_rate[static_cast<std::size_t>(b)]));
      if (tpr_ok[static_cast<std::size_t>(a)] && tpr_ok[static_cast<std::size_t>(b)])
        out.eo_gap = std::max(out.eo_gap, std::fabs(tpr[static_cast<std::size_t>(a)] -
                                                    tpr[static_cast<std::size_t>(b)]));
      if (fpr_ok[static_cast<std::size_t>(a)] && fpr_ok[static_cast<std::size_t>(b)])
        out.eo_gap = std::max(out.eo_gap, std::fabs(fpr[static_cast<std::size_t>(a)] -
                                                    fpr[static_cast<std::size_t>(b)]));
    }
  return out;
}

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n-1)
  int count = 0;
};

inline Aggregate aggregate(const std::vector<double>& values) {
  check(values.size() >= 2, Error::Kind::kShape, "aggregate needs at least 2 records");
  Aggregate out;
  out.count = static_cast<int>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= out.count;
  for (double v : values) out.stddev += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(out.stddev / (out.count - 1));
  return out;
}

// Per-metric aggregation over seed records; every metric must have the same
// record count.
inline std::map<std::string, Aggregate> aggregate_records(
    const std::map<std::string, std::vector<double>>& per_metric) {
  std::map<std::string, Aggregate> out;
  std::size_t n = 0;
  for (const auto& [name, values] : per_metric) {
    if (n == 0) n = values.size();
    check(values.size() == n, Error::Kind::kShape, "record count mismatch for metric " + name);
    out[name] = aggregate(values);
  }
  return out;
}

}  // namespace sccvfl::eval

#endif  // SCCVFL_METRICS_HPP_
