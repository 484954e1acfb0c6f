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

#ifndef SCCVFL_SYNTH_HPP_
#define SCCVFL_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sccvfl/dataset.hpp"
#include "sccvfl/error.hpp"
#include "sccvfl/rng.hpp"

namespace sccvfl::data {

// Built-in benchmark tables.  These are deterministic synthetic surrogates
// with the published schemas, sizes, and vertical partitions of the three
// benchmarks (credit, cardiac, recidivism); each is generated once from a
// fixed seed and shipped as a checked-in CSV with a documented column order.
// The loader regenerates the identical table in memory when the CSV is not
// on disk, so results do not depend on the working directory.

namespace synth_detail {

inline std::string fmt_int(double v) { return std::to_string(static_cast<long long>(std::llround(v))); }

inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline double clampi(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Force the sampled binary labels to an exact positive count by flipping the
// least confident rows; keeps class-count arithmetic in tests exact.
inline void force_label_count(std::vector<int>* y, const std::vector<double>& p, int want_positive) {
  std::vector<std::pair<double, int>> order;
  for (std::size_t i = 0; i < y->size(); ++i) order.push_back({p[i], static_cast<int>(i)});
  std::sort(order.begin(), order.end());
  int have = 0;
  for (int v : *y) have += v;
  if (have > want_positive) {
    for (auto& [prob, i] : order) {  // ascending p: flip least-confident positives
      if (have == want_positive) break;
      if ((*y)[static_cast<std::size_t>(i)] == 1) {
        (*y)[static_cast<std::size_t>(i)] = 0;
        --have;
      }
    }
  } else if (have < want_positive) {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (have == want_positive) break;
      if ((*y)[static_cast<std::size_t>(it->second)] == 0) {
        (*y)[static_cast<std::size_t>(it->second)] = 1;
        ++have;
      }
    }
  }
}

}  // namespace synth_detail

// --- credit (German-style): n=1000, 19 features + age + label ---------------

inline RawTable make_german_table() {
  using namespace synth_detail;
  const int n = 1000, n_young = 300, n_bad = 300;
  RngStream rng(RngStream::derive(0x5CC0FF, "synth/german"));
  RawTable t;
  t.header = {"check_status",   "duration",       "credit_history", "purpose",
              "credit_amount",  "savings",        "employment",     "installment_rate",
              "personal_status_sex", "other_debtors", "residence_since", "property",
              "age",            "other_install_plans", "housing",   "existing_credits",
              "job",            "dependents",     "telephone",      "foreign_worker",
              "default"};
  const char* purposes[4] = {"car", "furniture", "business", "education"};

  std::vector<std::vector<std::string>> rows;
  std::vector<double> label_p;
  std::vector<int> label;
  for (int i = 0; i < n; ++i) {
    const bool young = i < n_young;
    const int s = young ? 0 : 1;
    const double age = young ? 19 + rng.uniform_index(6) : 25 + rng.uniform_index(43);
    // Latent drivers: employment/credit maturity rises with the older group;
    // financial health and risk appetite are group-independent.
    const double u_stab = 1.25 * s + rng.normal();
    const double u_fin = rng.normal();
    const double u_risk = rng.normal();

    const double employment = clampi(std::round(1.0 + 1.0 * u_stab + 0.35 * rng.normal()), 0, 4);
    const double existing_credits = clampi(std::round(1.4 + 0.9 * u_stab + 0.35 * rng.normal()), 1, 4);
    const double credit_history = clampi(std::round(1.8 + 0.8 * u_stab - 0.25 * u_risk + 0.4 * rng.normal()), 0, 4);
    const double telephone = rng.uniform() < sigmoid(1.0 * u_stab - 0.4) ? 1 : 0;
    const double check_status = clampi(std::round(1.5 + 0.6 * u_fin + 0.35 * u_stab + 0.5 * rng.normal()), 0, 3);
    const double dependents = rng.uniform() < sigmoid(0.8 * s - 0.9) ? 2 : 1;
    const double housing = clampi(std::round(0.9 + 0.5 * u_stab + 0.45 * rng.normal()), 0, 2);
    const double job = clampi(std::round(1.5 + 0.45 * u_stab + 0.55 * rng.normal()), 0, 3);
    const double property = clampi(std::round(1.5 + 0.55 * u_fin + 0.2 * u_stab + 0.5 * rng.normal()), 0, 3);
    const double credit_amount = std::round(std::exp(7.6 + 0.45 * u_risk + 0.3 * u_fin + 0.35 * rng.normal()));
    const double residence_since = clampi(std::round(2.5 + 0.25 * u_stab + 0.85 * rng.normal()), 1, 4);
    const double duration = clampi(std::round(20.0 + 7.0 * u_risk + 5.0 * rng.normal()), 4, 72);
    const int purpose = static_cast<int>(clampi(std::floor(4.0 * rng.uniform()), 0, 3));
    const double installment_rate = clampi(std::round(2.5 - 0.55 * u_fin + 0.8 * rng.normal()), 1, 4);
    const double personal_status_sex = clampi(std::round(1.5 + 0.25 * u_stab + 0.9 * rng.normal()), 0, 3);
    const double other_debtors = clampi(std::round(0.3 + 0.1 * u_fin + 0.4 * rng.normal()), 0, 2);
    const double savings = clampi(std::round(1.8 + 0.75 * u_fin + 0.55 * rng.normal()), 0, 4);
    const double foreign_worker = rng.uniform() < sigmoid(-1.9 + 0.2 * u_fin) ? 1 : 0;
    const double other_install_plans = clampi(std::round(0.6 + 0.3 * u_risk + 0.5 * rng.normal()), 0, 2);

    const double z = -0.35 - 0.85 * (check_status - 1.5) / 1.0 - 0.55 * (savings - 1.8) / 1.0 +
                     0.062 * (duration - 20.0) - 0.60 * (credit_history - 1.8) / 1.0 -
                     0.45 * (employment - 1.9) / 1.3 + 0.35 * (installment_rate - 2.5) / 1.0 -
                     0.28 * (property - 1.6) / 1.0 + 0.00022 * (credit_amount - 2400.0) +
                     0.35 * u_risk;
    const double p_bad = sigmoid(z / 1.35);
    label_p.push_back(p_bad);
    label.push_back(rng.uniform() < p_bad ? 1 : 0);

    rows.push_back({fmt_int(check_status), fmt_int(duration), fmt_int(credit_history),
                    purposes[purpose], fmt_int(credit_amount), fmt_int(savings), fmt_int(employment),
                    fmt_int(installment_rate), fmt_int(personal_status_sex), fmt_int(other_debtors),
                    fmt_int(residence_since), fmt_int(property), fmt_int(age),
                    fmt_int(other_install_plans), fmt_int(housing), fmt_int(existing_credits),
                    fmt_int(job), fmt_int(dependents), fmt_int(telephone), fmt_int(foreign_worker),
                    ""});
  }
  force_label_count(&label, label_p, n_bad);
  for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)].back() = label[static_cast<std::size_t>(i)] ? "bad" : "good";

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order.begin(), order.end());
  for (int i : order) t.rows.push_back(rows[static_cast<std::size_t>(i)]);
  return t;
}

inline Schema german_schema() {
  Schema s;
  auto ord = [](const std::string& name) {
    ColumnSchema c;
    c.name = name;
    c.kind = ColKind::kOrdinal;
    c.encoding = Encoding::kOrdinalCodes;
    return c;
  };
  auto num = [](const std::string& name) {
    ColumnSchema c;
    c.name = name;
    c.kind = ColKind::kNumeric;
    c.encoding = Encoding::kStandardize;
    return c;
  };
  s.push_back(ord("check_status"));
  s.push_back(num("duration"));
  s.push_back(ord("credit_history"));
  {
    ColumnSchema c;
    c.name = "purpose";
    c.kind = ColKind::kCategorical;
    c.encoding = Encoding::kOneHot;
    c.levels = {"car", "furniture", "business", "education"};
    s.push_back(c);
  }
  s.push_back(num("credit_amount"));
  s.push_back(ord("savings"));
  s.push_back(ord("employment"));
  s.push_back(ord("installment_rate"));
  s.push_back(ord("personal_status_sex"));
  s.push_back(ord("other_debtors"));
  s.push_back(ord("residence_since"));
  s.push_back(ord("property"));
  {
    ColumnSchema c;
    c.name = "age";
    c.kind = ColKind::kNumeric;
    c.role = RoleHint::kProtected;
    ProtectedRule r;
    r.type = ProtectedRule::Type::kThresholdLess;
    r.threshold = 25.0;  // age < 25 -> group 0
    c.protected_rule = r;
    s.push_back(c);
  }
  s.push_back(ord("other_install_plans"));
  s.push_back(ord("housing"));
  s.push_back(ord("existing_credits"));
  s.push_back(ord("job"));
  s.push_back(ord("dependents"));
  s.push_back(ord("telephone"));
  s.push_back(ord("foreign_worker"));
  {
    ColumnSchema c;
    c.name = "default";
    c.kind = ColKind::kCategorical;
    c.role = RoleHint::kLabel;
    c.levels = {"good", "bad"};  // class 1 = bad
    s.push_back(c);
  }
  for (auto& c : s)
    if (c.kind == ColKind::kOrdinal && c.role == RoleHint::kFeature)
      c.levels = {"0", "1", "2", "3", "4"};
  return s;
}

// --- cardiac (Heart-style): n=303, 12 features + sex + label ----------------

inline RawTable make_heart_table() {
  using namespace synth_detail;
  const int n = 303, n_female = 97, n_pos = 139;
  RngStream rng(RngStream::derive(0x5CC0FF, "synth/heart"));
  RawTable t;
  t.header = {"age",   "sex",   "cp",     "trestbps", "chol",  "fbs",  "restecg",
              "thalach", "exang", "oldpeak", "slope",   "ca",    "thal", "disease"};
  std::vector<std::vector<std::string>> rows;
  std::vector<double> label_p;
  std::vector<int> label;
  for (int i = 0; i < n; ++i) {
    const int sex = i < n_female ? 0 : 1;  // 0 = female
    const double u_sev = rng.normal();     // latent disease severity
    const double age = clampi(std::round(54 + 9 * rng.normal()), 29, 77);
    const double cp = clampi(std::round(1.0 + 1.1 * u_sev + 0.6 * rng.normal()), 0, 3);
    const double trestbps = std::round(131 + 0.2 * (age - 54) + 16 * rng.normal());
    const double chol = std::round(246 + 22 * (sex == 0 ? 1 : 0) + 0.5 * (age - 54) + 45 * rng.normal());
    const double fbs = rng.uniform() < 0.15 ? 1 : 0;
    const double restecg = clampi(std::round(0.5 + 0.3 * u_sev + 0.6 * rng.normal()), 0, 2);
    const double thalach = std::round(149 - 0.9 * (age - 54) - 7.0 * u_sev + 8.0 * (sex == 0 ? 1 : 0) + 16 * rng.normal());
    const double exang = rng.uniform() < sigmoid(1.3 * u_sev - 0.9) ? 1 : 0;
    const double oldpeak = std::max(0.0, 1.0 + 0.9 * u_sev - 0.25 * (sex == 0 ? 1 : 0) + 0.7 * rng.normal());
    const double slope = clampi(std::round(1.0 + 0.5 * u_sev + 0.5 * rng.normal()), 0, 2);
    const double ca = clampi(std::round(0.6 + 0.85 * u_sev + 0.5 * rng.normal()), 0, 3);
    const double thal = clampi(std::round(0.8 + 0.8 * u_sev + 0.5 * rng.normal()), 0, 2);

    const double z = -2.2 + 1.6 * u_sev + 0.65 * cp + 0.9 * ca + 0.8 * thal + 0.55 * oldpeak +
                     0.5 * exang - 0.02 * (thalach - 149);
    const double p = sigmoid(z / 0.55);
    label_p.push_back(p);
    label.push_back(rng.uniform() < p ? 1 : 0);
    rows.push_back({fmt_int(age), fmt_int(sex), fmt_int(cp), fmt_int(trestbps), fmt_int(chol),
                    fmt_int(fbs), fmt_int(restecg), fmt_int(thalach), fmt_int(exang),
                    fmt_real(oldpeak), fmt_int(slope), fmt_int(ca), fmt_int(thal), ""});
  }
  force_label_count(&label, label_p, n_pos);
  for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)].back() = label[static_cast<std::size_t>(i)] ? "yes" : "no";
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order.begin(), order.end());
  for (int i : order) t.rows.push_back(rows[static_cast<std::size_t>(i)]);
  return t;
}

inline Schema heart_schema() {
  Schema s;
  auto num = [](const std::string& name) {
    ColumnSchema c;
    c.name = name;
    c.kind = ColKind::kNumeric;
    return c;
  };
  auto ord = [](const std::string& name, int levels) {
    ColumnSchema c;
    c.name = name;
    c.kind = ColKind::kOrdinal;
    c.encoding = Encoding::kOrdinalCodes;
    for (int k = 0; k < levels; ++k) c.levels.push_back(std::to_string(k));
    return c;
  };
  s.push_back(num("age"));
  {
    ColumnSchema c;
    c.name = "sex";
    c.kind = ColKind::kCategorical;
    c.role = RoleHint::kProtected;
    ProtectedRule r;
    r.type = ProtectedRule::Type::kCategories;
    r.levels = {"0", "1"};  // 0 = female
    c.protected_rule = r;
    s.push_back(c);
  }
  s.push_back(ord("cp", 4));
  s.push_back(num("trestbps"));
  s.push_back(num("chol"));
  s.push_back(ord("fbs", 2));
  s.push_back(ord("restecg", 3));
  s.push_back(num("thalach"));
  s.push_back(ord("exang", 2));
  s.push_back(num("oldpeak"));
  s.push_back(ord("slope", 3));
  s.push_back(ord("ca", 4));
  s.push_back(ord("thal", 3));
  {
    ColumnSchema c;
    c.name = "disease";
    c.kind = ColKind::kCategorical;
    c.role = RoleHint::kLabel;
    c.levels = {"no", "yes"};
    s.push_back(c);
  }
  return s;
}

// --- recidivism (COMPAS-style): n=6000, 18 features + race + label ----------

inline RawTable make_compas_table() {
  using namespace synth_detail;
  const int n = 6000, n_group0 = 2880, n_pos = 1100;
  RngStream rng(RngStream::derive(0x5CC0FF, "synth/compas"));
  RawTable t;
  t.header = {"charge_degree", "offense_type",  "priors_count",   "custody_days",
              "juv_fel_count", "juv_misd_count", "charge_count",  "probation_violations",
              "employment_status", "education_level", "supervision_level", "program_participation",
              "income_band",   "screening_age", "marital_status", "residence_stability",
              "housing_type",  "dependents",    "race",           "violent_recid"};
  std::vector<std::vector<std::string>> rows;
  std::vector<double> label_p;
  std::vector<int> label;
  for (int i = 0; i < n; ++i) {
    const int g = i < n_group0 ? 0 : 1;  // 0 = flagged group
    const double u_hist = 0.85 * (g == 0 ? 1.0 : 0.0) + rng.normal();  // enforcement exposure
    const double u_ses = -0.5 * (g == 0 ? 1.0 : 0.0) + rng.normal();   // socioeconomic standing
    const double u_r = rng.normal();

    const double charge_degree = rng.uniform() < sigmoid(0.6 * u_hist - 0.4) ? 1 : 0;
    const double offense_type = clampi(std::round(1.5 + 0.5 * u_hist + 0.7 * rng.normal()), 0, 3);
    const double priors_count = clampi(std::round(2.0 + 2.2 * u_hist + 1.0 * rng.normal()), 0, 20);
    const double custody_days = std::round(std::max(0.0, 60.0 + 90.0 * u_hist + 50.0 * rng.normal()));
    const double juv_fel = clampi(std::round(0.2 + 0.5 * u_hist + 0.4 * rng.normal()), 0, 5);
    const double juv_misd = clampi(std::round(0.3 + 0.5 * u_hist + 0.5 * rng.normal()), 0, 6);
    const double charge_count = clampi(std::round(1.5 + 0.8 * u_hist + 0.8 * rng.normal()), 1, 10);
    const double probation_violations = clampi(std::round(0.4 + 0.6 * u_hist + 0.5 * rng.normal()), 0, 5);
    const double employment_status = clampi(std::round(1.2 + 0.7 * u_ses + 0.5 * rng.normal()), 0, 2);
    const double education_level = clampi(std::round(1.6 + 0.7 * u_ses + 0.6 * rng.normal()), 0, 3);
    const double supervision_level = clampi(std::round(1.4 + 0.6 * u_hist + 0.6 * rng.normal()), 0, 3);
    const double program_participation = rng.uniform() < sigmoid(0.7 * u_ses - 0.2) ? 1 : 0;
    const double income_band = clampi(std::round(1.5 + 0.8 * u_ses + 0.5 * rng.normal()), 0, 3);
    const double screening_age = clampi(std::round(32 + 10 * rng.normal()), 18, 70);
    const double marital_status = clampi(std::round(1.0 + 0.3 * u_ses + 0.8 * rng.normal()), 0, 2);
    const double residence_stability = clampi(std::round(1.5 + 0.65 * u_ses + 0.5 * rng.normal()), 0, 3);
    const double housing_type = clampi(std::round(1.2 + 0.5 * u_ses + 0.6 * rng.normal()), 0, 2);
    const double dependents = clampi(std::round(1.0 + 0.8 * rng.normal()), 0, 4);

    const double z = -3.1 + 0.32 * priors_count + 0.004 * custody_days + 0.5 * charge_degree +
                     0.35 * probation_violations + 0.3 * juv_fel - 0.25 * employment_status -
                     0.2 * residence_stability - 0.03 * (screening_age - 32) + 0.3 * u_r;
    const double p = sigmoid(z / 0.50);
    label_p.push_back(p);
    label.push_back(rng.uniform() < p ? 1 : 0);
    rows.push_back({fmt_int(charge_degree), fmt_int(offense_type), fmt_int(priors_count),
                    fmt_int(custody_days), fmt_int(juv_fel), fmt_int(juv_misd), fmt_int(charge_count),
                    fmt_int(probation_violations), fmt_int(employment_status), fmt_int(education_level),
                    fmt_int(supervision_level), fmt_int(program_participation), fmt_int(income_band),
                    fmt_int(screening_age), fmt_int(marital_status), fmt_int(residence_stability),
                    fmt_int(housing_type), fmt_int(dependents), g == 0 ? "aa" : "other", ""});
  }
  force_label_count(&label, label_p, n_pos);
  for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)].back() = label[static_cast<std::size_t>(i)] ? "yes" : "no";
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order.begin(), order.end());
  for (int i : order) t.rows.push_back(rows[static_cast<std::size_t>(i)]);
  return t;
}

inline Schema compas_schema() {
  Schema s;
  auto num = [](const std::string& name) {
    ColumnSchema c;
    c.name = name;
    c.kind = ColKind::kNumeric;
    return c;
  };
  for (const char* name : {"charge_degree", "offense_type", "priors_count", "custody_days",
                           "juv_fel_count", "juv_misd_count", "charge_count", "probation_violations",
                           "employment_status", "education_level", "supervision_level",
                           "program_participation", "income_band", "screening_age", "marital_status",
                           "residence_stability", "housing_type", "dependents"})
    s.push_back(num(name));
  {
    ColumnSchema c;
    c.name = "race";
    c.kind = ColKind::kCategorical;
    c.role = RoleHint::kProtected;
    ProtectedRule r;
    r.type = ProtectedRule::Type::kCategories;
    r.levels = {"aa", "other"};
    c.protected_rule = r;
    s.push_back(c);
  }
  {
    ColumnSchema c;
    c.name = "violent_recid";
    c.kind = ColKind::kCategorical;
    c.role = RoleHint::kLabel;
    c.levels = {"no", "yes"};
    s.push_back(c);
  }
  return s;
}

// --- registry ----------------------------------------------------------------

inline bool is_builtin(const std::string& name) {
  return name == "german" || name == "heart" || name == "compas";
}

inline RawTable builtin_table(const std::string& name) {
  if (name == "german") return make_german_table();
  if (name == "heart") return make_heart_table();
  if (name == "compas") return make_compas_table();
  throw Error(Error::Kind::kConfig, "unknown built-in dataset: " + name);
}

inline Schema builtin_schema(const std::string& name) {
  if (name == "german") return german_schema();
  if (name == "heart") return heart_schema();
  if (name == "compas") return compas_schema();
  throw Error(Error::Kind::kConfig, "unknown built-in dataset: " + name);
}

// Vertical partitions by raw feature name; expanded to encoded columns after
// loading (one-hot columns inherit their base column's party).
inline std::vector<std::pair<std::string, std::vector<std::string>>> builtin_partition(
    const std::string& name) {
  if (name == "german")
    return {{"bank", {"check_status", "credit_history", "credit_amount", "duration",
                      "installment_rate", "purpose", "existing_credits", "other_install_plans"}},
            {"employer", {"employment", "job", "housing", "dependents", "personal_status_sex",
                          "telephone"}},
            {"bureau", {"savings", "property", "other_debtors", "foreign_worker", "residence_since"}}};
  if (name == "heart")
    return {{"hospital", {"trestbps", "chol", "oldpeak", "thalach"}},
            {"clinic", {"age", "cp", "ca", "slope"}},
            {"payer", {"fbs", "restecg", "thal", "exang"}}};
  if (name == "compas")
    return {{"court", {"charge_degree", "offense_type", "priors_count", "custody_days",
                       "juv_fel_count", "juv_misd_count", "charge_count", "probation_violations"}},
            {"community", {"employment_status", "education_level", "supervision_level",
                           "program_participation", "income_band"}},
            {"agency", {"screening_age", "marital_status", "residence_stability", "housing_type",
                        "dependents"}}};
  throw Error(Error::Kind::kConfig, "unknown built-in dataset: " + name);
}

inline VerticalLayout expand_layout(
    const std::vector<std::string>& feature_names,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& groups) {
  VerticalLayout layout;
  auto base_name = [](const std::string& enc) {
    const auto pos = enc.find('=');
    return pos == std::string::npos ? enc : enc.substr(0, pos);
  };
  for (const auto& [party, names] : groups) {
    std::vector<int> cols;
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
      const std::string base = base_name(feature_names[j]);
      if (std::find(names.begin(), names.end(), base) != names.end())
        cols.push_back(static_cast<int>(j));
    }
    layout.party_names.push_back(party);
    layout.party_cols.push_back(cols);
  }
  return layout;
}

inline void write_table_csv(const RawTable& t, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), Error::Kind::kIo, "cannot write " + path);
  for (std::size_t c = 0; c < t.header.size(); ++c) f << (c ? "," : "") << t.header[c];
  f << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) f << (c ? "," : "") << row[c];
    f << "\n";
  }
}

// Resolves a built-in name to its table: the checked-in CSV under
// SCCVFL_DATA_DIR (or ./data) when present, otherwise the in-memory
// regeneration, which is bit-identical by construction.
inline RawTable resolve_builtin_table(const std::string& name) {
  const char* dir = std::getenv("SCCVFL_DATA_DIR");
  const std::string base = dir ? dir : "data";
  const std::string path = base + "/" + name + ".csv";
  std::ifstream probe(path);
  if (probe.good()) return parse_csv(probe, path);
  return builtin_table(name);
}

// Entry point named in the external interface: `source` is a file path or a
// built-in name; built-ins carry their own schema when none is supplied.
inline Dataset load_dataset(const std::string& source, const Schema& schema = {}) {
  if (is_builtin(source)) {
    return load_csv_dataset(resolve_builtin_table(source),
                            schema.empty() ? builtin_schema(source) : schema);
  }
  check(!schema.empty(), Error::Kind::kSchema, "a schema is required for file sources");
  return load_csv_dataset(read_csv(source), schema);
}

}  // namespace sccvfl::data

#endif  // SCCVFL_SYNTH_HPP_
