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

#ifndef SCCVFL_DATASET_HPP_
#define SCCVFL_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/matrix.hpp"
#include "sccvfl/rng.hpp"

namespace sccvfl::data {

enum class ColKind { kNumeric, kCategorical, kOrdinal };
enum class RoleHint { kFeature, kLabel, kProtected };
enum class Encoding { kStandardize, kOneHot, kOrdinalCodes };

// Rule mapping a raw protected column to group indices. The threshold form
// yields group 0 below the cutoff; the category form maps each level to its
// index in `levels` (supporting multi-group attributes).
struct ProtectedRule {
  enum class Type { kThresholdLess, kCategories };
  Type type = Type::kThresholdLess;
  double threshold = 0.0;
  std::vector<std::string> levels;
};

struct ColumnSchema {
  std::string name;
  ColKind kind = ColKind::kNumeric;
  RoleHint role = RoleHint::kFeature;
  Encoding encoding = Encoding::kStandardize;
  std::vector<std::string> levels;  // categorical/ordinal level order; inferred when empty
  std::optional<ProtectedRule> protected_rule;
};

using Schema = std::vector<ColumnSchema>;

inline void validate_schema(const Schema& schema) {
  int labels = 0, prot = 0;
  for (const auto& c : schema) {
    if (c.role == RoleHint::kLabel) ++labels;
    if (c.role == RoleHint::kProtected) ++prot;
  }
  check(labels == 1, Error::Kind::kSchema, "schema must have exactly one label column");
  check(prot <= 1, Error::Kind::kSchema, "schema allows at most one protected column");
}

// Aligned entity table after encoding: features X, class labels y, protected
// group indices s. The protected and label columns never appear in X.
struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::vector<int> s;
  int num_classes = 0;
  int num_groups = 0;
  Schema schema;
  std::vector<std::string> feature_names;  // post-encoding column names

  int rows() const { return x.rows(); }
  int cols() const { return x.cols(); }

  Dataset take(const std::vector<int>& idx) const {
    Dataset out = *this;
    out.x = x.take_rows(idx);
    out.y.clear();
    out.s.clear();
    for (int i : idx) {
      out.y.push_back(y[static_cast<std::size_t>(i)]);
      out.s.push_back(s[static_cast<std::size_t>(i)]);
    }
    return out;
  }
};

// Per-party disjoint column index sets covering {0..d-1}.
struct VerticalLayout {
  std::vector<std::string> party_names;
  std::vector<std::vector<int>> party_cols;

  int parties() const { return static_cast<int>(party_cols.size()); }

  void validate(int total_cols) const {
    check(parties() >= 1, Error::Kind::kLayout, "layout needs at least one party");
    std::vector<int> seen(static_cast<std::size_t>(total_cols), 0);
    for (const auto& cols : party_cols)
      for (int c : cols) {
        check(c >= 0 && c < total_cols, Error::Kind::kLayout, "layout column out of range");
        check(seen[static_cast<std::size_t>(c)] == 0, Error::Kind::kLayout, "layout columns overlap");
        seen[static_cast<std::size_t>(c)] = 1;
      }
    for (int c = 0; c < total_cols; ++c)
      check(seen[static_cast<std::size_t>(c)] == 1, Error::Kind::kLayout,
            "layout does not cover column " + std::to_string(c));
  }
};

struct SplitSpec {
  enum class Mode { kIid, kNonIid };
  Mode mode = Mode::kIid;
  double train_frac = 0.70;
  double val_frac_of_train = 0.20;
  std::vector<double> shift_test_group_frac;  // non-IID: target test group proportions
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train, val, test;
  std::vector<int> train_idx, val_idx, test_idx;
};

// ---------------------------------------------------------------------------
// CSV ingestion

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline RawTable parse_csv(std::istream& in, const std::string& what) {
  RawTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      t.header = cells;
      first = false;
    } else {
      check(cells.size() == t.header.size(), Error::Kind::kIngest,
            what + ": row " + std::to_string(t.rows.size() + 2) + " has " +
                std::to_string(cells.size()) + " cells, expected " + std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  check(!t.header.empty(), Error::Kind::kIngest, what + ": empty file, zero rows");
  check(!t.rows.empty(), Error::Kind::kIngest, what + ": no data rows");
  return t;
}

inline RawTable read_csv(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), Error::Kind::kIngest, "cannot open " + path);
  return parse_csv(f, path);
}

inline bool cell_missing(const std::string& c) {
  return c.empty() || c == "NA" || c == "na" || c == "?";
}

inline double parse_numeric(const std::string& cell, int row, const std::string& col) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw Error(Error::Kind::kIngest,
                "unparseable numeric cell '" + cell + "' at row " + std::to_string(row) +
                    ", column " + col);
  }
  check(used == cell.size(), Error::Kind::kIngest,
        "trailing junk in numeric cell '" + cell + "' at row " + std::to_string(row) + ", column " + col);
  return v;
}

// ---------------------------------------------------------------------------
// Loading and encoding

namespace detail {

inline std::vector<std::string> infer_levels(const RawTable& t, std::size_t col) {
  std::set<std::string> uniq;
  for (const auto& r : t.rows) uniq.insert(r[col]);
  return {uniq.begin(), uniq.end()};
}

inline int level_index(const std::vector<std::string>& levels, const std::string& v, int row,
                       const std::string& col) {
  for (std::size_t k = 0; k < levels.size(); ++k)
    if (levels[k] == v) return static_cast<int>(k);
  throw Error(Error::Kind::kIngest,
              "unknown level '" + v + "' at row " + std::to_string(row) + ", column " + col);
}

}  // namespace detail

// Loads a delimited file against a schema: the label and protected columns
// are extracted to y / s and removed from the feature matrix; categorical
// columns are one-hot encoded with all levels kept so downstream mask
// indices map 1:1 to named columns.
inline Dataset load_csv_dataset(const RawTable& table, const Schema& schema) {
  validate_schema(schema);
  std::map<std::string, std::size_t> col_of;
  for (std::size_t c = 0; c < table.header.size(); ++c) col_of[table.header[c]] = c;
  for (const auto& col : schema)
    check(col_of.count(col.name) > 0, Error::Kind::kSchema, "schema column missing in data: " + col.name);

  const int n = static_cast<int>(table.rows.size());
  Dataset ds;
  ds.schema = schema;

  // Pass 1: resolve level lists and count encoded width.
  Schema resolved = schema;
  int width = 0;
  for (auto& col : resolved) {
    if (col.role != RoleHint::kFeature) continue;
    if (col.kind == ColKind::kNumeric) {
      width += 1;
    } else {
      if (col.levels.empty()) col.levels = detail::infer_levels(table, col_of[col.name]);
      width += col.encoding == Encoding::kOneHot ? static_cast<int>(col.levels.size()) : 1;
    }
  }

  ds.x = Matrix(n, width);
  int at = 0;
  for (const auto& col : resolved) {
    if (col.role != RoleHint::kFeature) continue;
    const std::size_t c = col_of[col.name];
    if (col.kind == ColKind::kNumeric || col.encoding == Encoding::kStandardize) {
      ds.feature_names.push_back(col.name);
      for (int i = 0; i < n; ++i) {
        const std::string& cell = table.rows[static_cast<std::size_t>(i)][c];
        ds.x(i, at) = cell_missing(cell) ? std::nan("") : parse_numeric(cell, i + 2, col.name);
      }
      ++at;
    } else if (col.encoding == Encoding::kOrdinalCodes) {
      ds.feature_names.push_back(col.name);
      for (int i = 0; i < n; ++i)
        ds.x(i, at) = detail::level_index(col.levels, table.rows[static_cast<std::size_t>(i)][c],
                                          i + 2, col.name);
      ++at;
    } else {  // one-hot, all levels kept
      for (const auto& lvl : col.levels) ds.feature_names.push_back(col.name + "=" + lvl);
      for (int i = 0; i < n; ++i) {
        const int k = detail::level_index(col.levels, table.rows[static_cast<std::size_t>(i)][c],
                                          i + 2, col.name);
        ds.x(i, at + k) = 1.0;
      }
      at += static_cast<int>(col.levels.size());
    }
  }

  // Label: class indices in level order (inferred sorted order when absent).
  for (const auto& col : resolved) {
    if (col.role != RoleHint::kLabel) continue;
    const std::size_t c = col_of[col.name];
    std::vector<std::string> levels = col.levels.empty() ? detail::infer_levels(table, c) : col.levels;
    ds.num_classes = static_cast<int>(levels.size());
    check(ds.num_classes >= 2, Error::Kind::kSchema, "label column has fewer than 2 classes");
    for (int i = 0; i < n; ++i)
      ds.y.push_back(detail::level_index(levels, table.rows[static_cast<std::size_t>(i)][c], i + 2, col.name));
  }

  // Protected attribute via the schema rule.
  ds.num_groups = 1;
  ds.s.assign(static_cast<std::size_t>(n), 0);
  for (const auto& col : resolved) {
    if (col.role != RoleHint::kProtected) continue;
    check(col.protected_rule.has_value(), Error::Kind::kSchema,
          "protected column needs a protected_rule: " + col.name);
    const std::size_t c = col_of[col.name];
    const ProtectedRule& rule = *col.protected_rule;
    if (rule.type == ProtectedRule::Type::kThresholdLess) {
      ds.num_groups = 2;
      for (int i = 0; i < n; ++i) {
        const double v = parse_numeric(table.rows[static_cast<std::size_t>(i)][c], i + 2, col.name);
        ds.s[static_cast<std::size_t>(i)] = v < rule.threshold ? 0 : 1;
      }
    } else {
      ds.num_groups = static_cast<int>(rule.levels.size());
      for (int i = 0; i < n; ++i)
        ds.s[static_cast<std::size_t>(i)] =
            detail::level_index(rule.levels, table.rows[static_cast<std::size_t>(i)][c], i + 2, col.name);
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Preprocessing (fit on the training split only)

struct PreprocessState {
  std::vector<double> mean, stddev, median;
  std::vector<bool> zero_variance;
  std::vector<std::string> warnings;
};

inline PreprocessState fit_preprocess(const Dataset& train) {
  const int n = train.rows(), d = train.cols();
  check(n > 0, Error::Kind::kShape, "fit_preprocess on empty split");
  PreprocessState st;
  st.mean.assign(static_cast<std::size_t>(d), 0.0);
  st.stddev.assign(static_cast<std::size_t>(d), 1.0);
  st.median.assign(static_cast<std::size_t>(d), 0.0);
  st.zero_variance.assign(static_cast<std::size_t>(d), false);
  for (int j = 0; j < d; ++j) {
    std::vector<double> present;
    for (int i = 0; i < n; ++i)
      if (!std::isnan(train.x(i, j))) present.push_back(train.x(i, j));
    check(!present.empty(), Error::Kind::kIngest,
          "column " + train.feature_names[static_cast<std::size_t>(j)] + " is entirely missing");
    std::sort(present.begin(), present.end());
    const std::size_t mid = present.size() / 2;
    st.median[static_cast<std::size_t>(j)] =
        present.size() % 2 == 1 ? present[mid] : 0.5 * (present[mid - 1] + present[mid]);
    double mean = 0.0;
    for (double v : present) mean += v;
    mean /= static_cast<double>(present.size());
    double var = 0.0;
    // Imputation happens before scaling, so missing cells contribute the
    // median to the fitted statistics as well.
    const double imputed = st.median[static_cast<std::size_t>(j)];
    double full_mean = (mean * static_cast<double>(present.size()) +
                        imputed * static_cast<double>(n - static_cast<int>(present.size()))) /
                       n;
    for (int i = 0; i < n; ++i) {
      const double v = std::isnan(train.x(i, j)) ? imputed : train.x(i, j);
      var += (v - full_mean) * (v - full_mean);
    }
    var /= n;  // population convention
    st.mean[static_cast<std::size_t>(j)] = full_mean;
    if (var <= 1e-24) {
      st.zero_variance[static_cast<std::size_t>(j)] = true;
      st.stddev[static_cast<std::size_t>(j)] = 1.0;
      st.warnings.push_back("zero-variance column standardized to zeros: " +
                            train.feature_names[static_cast<std::size_t>(j)]);
    } else {
      st.stddev[static_cast<std::size_t>(j)] = std::sqrt(var);
    }
  }
  return st;
}

inline Dataset apply_preprocess(const PreprocessState& st, const Dataset& ds) {
  check(static_cast<int>(st.mean.size()) == ds.cols(), Error::Kind::kShape,
        "preprocess state width mismatch");
  Dataset out = ds;
  for (int j = 0; j < ds.cols(); ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    for (int i = 0; i < ds.rows(); ++i) {
      double v = std::isnan(ds.x(i, j)) ? st.median[sj] : ds.x(i, j);
      out.x(i, j) = st.zero_variance[sj] ? 0.0 : (v - st.mean[sj]) / st.stddev[sj];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vertical partition

inline std::vector<Matrix> vertical_partition(const Dataset& ds, const VerticalLayout& layout) {
  layout.validate(ds.cols());
  std::vector<Matrix> views;
  views.reserve(layout.party_cols.size());
  for (const auto& cols : layout.party_cols) views.push_back(ds.x.take_cols(cols));
  return views;
}

// ---------------------------------------------------------------------------
// Splits

namespace detail {

// Deterministic class-stratified draw: per stratum, shuffle then take the
// floor quota for test, then the floor val quota from the remaining train.
// Remainders stay in train.
inline void stratified_indices(const std::vector<int>& strata, double test_frac, double val_frac,
                               RngStream& rng, std::vector<int>* train, std::vector<int>* val,
                               std::vector<int>* test) {
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i)
    groups[strata[i]].push_back(static_cast<int>(i));
  for (auto& [g, idx] : groups) {
    rng.shuffle(idx.begin(), idx.end());
    const int n = static_cast<int>(idx.size());
    const int n_test = static_cast<int>(std::floor(test_frac * n));
    const int n_val = static_cast<int>(std::floor(val_frac * (n - n_test)));
    for (int k = 0; k < n_test; ++k) test->push_back(idx[static_cast<std::size_t>(k)]);
    for (int k = n_test; k < n_test + n_val; ++k) val->push_back(idx[static_cast<std::size_t>(k)]);
    for (int k = n_test + n_val; k < n; ++k) train->push_back(idx[static_cast<std::size_t>(k)]);
  }
  std::sort(train->begin(), train->end());
  std::sort(val->begin(), val->end());
  std::sort(test->begin(), test->end());
}

}  // namespace detail

inline Splits make_splits(const Dataset& ds, const SplitSpec& spec) {
  check(spec.train_frac > 0.0 && spec.train_frac < 1.0, Error::Kind::kSplit, "train_frac outside (0,1)");
  check(spec.val_frac_of_train > 0.0 && spec.val_frac_of_train < 1.0, Error::Kind::kSplit,
        "val_frac outside (0,1)");
  const double test_frac = 1.0 - spec.train_frac;
  Splits out;
  RngStream rng = RngStream::substream(spec.seed, "splits");

  if (spec.mode == SplitSpec::Mode::kIid) {
    detail::stratified_indices(ds.y, test_frac, spec.val_frac_of_train, rng, &out.train_idx,
                               &out.val_idx, &out.test_idx);
  } else {
    check(!spec.shift_test_group_frac.empty(), Error::Kind::kSplit, "non-IID split needs a shift spec");
    check(static_cast<int>(spec.shift_test_group_frac.size()) == ds.num_groups, Error::Kind::kSplit,
          "shift spec group count mismatch");
    // Per-group test quotas from the shift spec; class stratification happens
    // inside each group so class balance is preserved while group
    // proportions move.
    const int n = ds.rows();
    const int n_test_total = static_cast<int>(std::floor(test_frac * n));
    std::map<int, std::vector<int>> by_group;
    for (int i = 0; i < n; ++i) by_group[ds.s[static_cast<std::size_t>(i)]].push_back(i);
    for (int g = 0; g < ds.num_groups; ++g) {
      const double frac = spec.shift_test_group_frac[static_cast<std::size_t>(g)];
      check(frac >= 0.0 && frac <= 1.0, Error::Kind::kSplit, "shift fraction outside [0,1]");
      auto it = by_group.find(g);
      const int avail = it == by_group.end() ? 0 : static_cast<int>(it->second.size());
      const int want = static_cast<int>(std::llround(frac * n_test_total));
      check(want <= avail, Error::Kind::kSplit,
            "shift requests " + std::to_string(want) + " test rows from group " + std::to_string(g) +
                " but only " + std::to_string(avail) + " exist");
    }
    for (auto& [g, idx] : by_group) {
      // Class-stratified inside the group: quota split across classes by
      // proportion, floors with remainder to the largest classes.
      const double frac = spec.shift_test_group_frac[static_cast<std::size_t>(g)];
      const int quota = static_cast<int>(std::llround(frac * n_test_total));
      std::map<int, std::vector<int>> by_class;
      for (int i : idx) by_class[ds.y[static_cast<std::size_t>(i)]].push_back(i);
      int assigned = 0;
      std::vector<std::pair<double, int>> frac_left;
      std::map<int, int> take;
      for (auto& [cls, rows] : by_class) {
        rng.shuffle(rows.begin(), rows.end());
        const double ideal = static_cast<double>(quota) * rows.size() / idx.size();
        take[cls] = std::min(static_cast<int>(std::floor(ideal)), static_cast<int>(rows.size()));
        assigned += take[cls];
        frac_left.push_back({ideal - take[cls], cls});
      }
      std::sort(frac_left.rbegin(), frac_left.rend());
      for (auto& [f, cls] : frac_left) {
        if (assigned >= quota) break;
        if (take[cls] < static_cast<int>(by_class[cls].size())) {
          ++take[cls];
          ++assigned;
        }
      }
      for (auto& [cls, rows] : by_class) {
        for (int k = 0; k < take[cls]; ++k) out.test_idx.push_back(rows[static_cast<std::size_t>(k)]);
        for (int k = take[cls]; k < static_cast<int>(rows.size()); ++k)
          out.train_idx.push_back(rows[static_cast<std::size_t>(k)]);
      }
    }
    // Validation: class-stratified 20% carved from the interim train pool.
    std::vector<int> pool = out.train_idx;
    out.train_idx.clear();
    std::map<int, std::vector<int>> by_class;
    for (int i : pool) by_class[ds.y[static_cast<std::size_t>(i)]].push_back(i);
    for (auto& [cls, rows] : by_class) {
      rng.shuffle(rows.begin(), rows.end());
      const int n_val = static_cast<int>(std::floor(spec.val_frac_of_train * rows.size()));
      for (int k = 0; k < n_val; ++k) out.val_idx.push_back(rows[static_cast<std::size_t>(k)]);
      for (int k = n_val; k < static_cast<int>(rows.size()); ++k)
        out.train_idx.push_back(rows[static_cast<std::size_t>(k)]);
    }
    std::sort(out.train_idx.begin(), out.train_idx.end());
    std::sort(out.val_idx.begin(), out.val_idx.end());
    std::sort(out.test_idx.begin(), out.test_idx.end());
  }

  out.train = ds.take(out.train_idx);
  out.val = ds.take(out.val_idx);
  out.test = ds.take(out.test_idx);
  return out;
}

// ---------------------------------------------------------------------------
// Export of preprocessed splits with a sidecar descriptor

inline void export_split_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), Error::Kind::kIo, "cannot write " + path);
  f << "__label__,__group__";
  for (const auto& name : ds.feature_names) f << "," << name;
  f << "\n";
  f.precision(17);
  for (int i = 0; i < ds.rows(); ++i) {
    f << ds.y[static_cast<std::size_t>(i)] << "," << ds.s[static_cast<std::size_t>(i)];
    for (int j = 0; j < ds.cols(); ++j) f << "," << ds.x(i, j);
    f << "\n";
  }
}

}  // namespace sccvfl::data

#endif  // SCCVFL_DATASET_HPP_
