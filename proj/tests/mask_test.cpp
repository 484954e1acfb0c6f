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

#include <cmath>

#include <gtest/gtest.h>

#include "sccvfl/mask.hpp"
#include "sccvfl/synth.hpp"

namespace sccvfl::discovery {
namespace {

data::VerticalLayout two_party_layout(int d_first, int d_total) {
  data::VerticalLayout layout;
  layout.party_names = {"a", "b"};
  std::vector<int> a, b;
  for (int c = 0; c < d_first; ++c) a.push_back(c);
  for (int c = d_first; c < d_total; ++c) b.push_back(c);
  layout.party_cols = {a, b};
  return layout;
}

ScoreSet scores_from(const std::vector<double>& combined, const data::VerticalLayout& layout) {
  ScoreSet s;
  for (int party = 0; party < layout.parties(); ++party)
    for (int c : layout.party_cols[static_cast<std::size_t>(party)]) {
      FeatureScore sc;
      sc.feature = c;
      sc.party = party;
      sc.combined = combined[static_cast<std::size_t>(c)];
      sc.hsic = combined[static_cast<std::size_t>(c)];
      sc.delta = combined[static_cast<std::size_t>(c)];
      s.push_back(sc);
    }
  return s;
}

TEST(ScoreFromTable, HandProbabilityArithmetic) {
  dp::ContingencyTable t;
  t.counts = Matrix::from_rows({{6, 4}, {4, 6}});
  const TableScore s = score_from_table(t);
  EXPECT_TRUE(s.available);
  EXPECT_NEAR(s.delta, 0.2, 1e-12);  // tie broken toward the positive gap
  EXPECT_NEAR(s.hsic, 4 * 0.05 * 0.05, 1e-12);

  dp::ContingencyTable ident;
  ident.counts = Matrix::from_rows({{5, 5}, {5, 5}});
  const TableScore si = score_from_table(ident);
  EXPECT_DOUBLE_EQ(si.delta, 0.0);
  EXPECT_DOUBLE_EQ(si.hsic, 0.0);

  dp::ContingencyTable perfect;
  perfect.counts = Matrix::from_rows({{10, 0}, {0, 10}});
  EXPECT_DOUBLE_EQ(score_from_table(perfect).delta, 1.0);
}

TEST(ScoreFromTable, EmptyGroupRowIsUnavailable) {
  dp::ContingencyTable t;
  t.counts = Matrix::from_rows({{3, 3}, {-1, -2}});  // noisy row clamps to zero mass
  EXPECT_FALSE(score_from_table(t).available);
}

TEST(CombineScores, TiesAndDominance) {
  data::VerticalLayout layout = two_party_layout(3, 3);
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2}};
  ScoreSet s;
  for (int c = 0; c < 3; ++c) {
    FeatureScore sc;
    sc.feature = c;
    sc.party = 0;
    sc.delta = 0.0;
    sc.hsic = 0.0;
    s.push_back(sc);
  }
  combine_scores(&s);
  EXPECT_DOUBLE_EQ(s[0].combined, s[1].combined);  // all equal, stable tie-break downstream
  s[1].delta = 0.9;
  s[1].hsic = 0.9;
  combine_scores(&s);
  EXPECT_GT(s[1].combined, s[0].combined);  // dominant feature ranks first
}

TEST(Tripartition, ExactFractionSizes) {
  data::VerticalLayout layout = two_party_layout(10, 10);
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  std::vector<double> combined(10);
  for (int c = 0; c < 10; ++c) combined[static_cast<std::size_t>(c)] = 10.0 - c;
  FeatureMask mask = tripartition(scores_from(combined, layout), 0.6, 0.5, layout);
  EXPECT_EQ(mask.parties[0].m.size(), 6u);
  EXPECT_EQ(mask.parties[0].p.size(), 3u);
  EXPECT_EQ(mask.parties[0].n.size(), 4u);
  // rho_m = 1: everything is a mediator.
  FeatureMask all = tripartition(scores_from(combined, layout), 1.0, 0.5, layout);
  EXPECT_TRUE(all.parties[0].n.empty());
  EXPECT_EQ(all.parties[0].m.size(), 10u);
}

TEST(Tripartition, MaskSizesMonotoneInRhoM) {
  data::VerticalLayout layout;
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
  std::vector<double> combined(12);
  for (int c = 0; c < 12; ++c) combined[static_cast<std::size_t>(c)] = 12.0 - c;
  std::size_t prev = 0;
  for (double rho : {0.15, 0.25, 0.33, 0.45, 0.60}) {
    FeatureMask mask = tripartition(scores_from(combined, layout), rho, 0.5, layout);
    EXPECT_GE(mask.parties[0].m.size(), prev);
    prev = mask.parties[0].m.size();
  }
}

TEST(Tripartition, DeterministicTieBreakByFeatureIndex) {
  data::VerticalLayout layout;
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2, 3}};
  std::vector<double> combined = {1.0, 1.0, 1.0, 1.0};
  FeatureMask mask = tripartition(scores_from(combined, layout), 0.5, 0.5, layout);
  EXPECT_EQ(mask.parties[0].m, (std::vector<int>{0, 1}));  // lowest indices win ties
  EXPECT_EQ(mask.parties[0].p, (std::vector<int>{0}));
}

TEST(RefreshMasks, IdenticalScoresAreAFixedPoint) {
  data::VerticalLayout layout;
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  std::vector<double> combined(10);
  for (int c = 0; c < 10; ++c) combined[static_cast<std::size_t>(c)] = 10.0 - c;
  ScoreSet scores = scores_from(combined, layout);
  for (auto& sc : scores) sc.p_value = 0.001;
  FeatureMask mask = tripartition(scores, 0.6, 0.5, layout);
  RefreshPolicy policy;
  auto once = refresh_masks(mask, scores, policy, layout);
  EXPECT_TRUE(once.changes.empty());
  EXPECT_EQ(once.mask.version, mask.version + 1);
  EXPECT_EQ(once.mask.parties[0].n, mask.parties[0].n);
  EXPECT_EQ(once.mask.parties[0].m, mask.parties[0].m);
  EXPECT_EQ(once.mask.parties[0].p, mask.parties[0].p);
  // Idempotence beyond the version counter.
  auto twice = refresh_masks(once.mask, scores, policy, layout);
  EXPECT_EQ(twice.mask.parties[0].m, once.mask.parties[0].m);
  EXPECT_EQ(twice.mask.parties[0].p, once.mask.parties[0].p);
}

TEST(RefreshMasks, AdjacentSwapWithinMarginDoesNotChangeRoles) {
  data::VerticalLayout layout;
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  std::vector<double> combined(10);
  for (int c = 0; c < 10; ++c) combined[static_cast<std::size_t>(c)] = 10.0 - c;
  ScoreSet scores = scores_from(combined, layout);
  for (auto& sc : scores) sc.p_value = 0.001;
  FeatureMask mask = tripartition(scores, 0.6, 0.5, layout);
  // Swap ranks of the boundary features 5 (in M) and 6 (in N): one position,
  // inside the hysteresis margin of 0.2 * 10 = 2.
  std::vector<double> swapped = combined;
  std::swap(swapped[5], swapped[6]);
  ScoreSet scores2 = scores_from(swapped, layout);
  for (auto& sc : scores2) sc.p_value = 0.001;
  RefreshPolicy policy;
  policy.hysteresis_margin = 0.2;
  auto out = refresh_masks(mask, scores2, policy, layout);
  EXPECT_EQ(out.mask.parties[0].m, mask.parties[0].m);
  EXPECT_EQ(out.mask.parties[0].n, mask.parties[0].n);
}

TEST(RefreshMasks, PlantedDependencePromotesAfterBh) {
  data::VerticalLayout layout;
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  std::vector<double> combined(10);
  for (int c = 0; c < 10; ++c) combined[static_cast<std::size_t>(c)] = 10.0 - c;
  ScoreSet scores = scores_from(combined, layout);
  for (auto& sc : scores) sc.p_value = 0.001;
  FeatureMask mask = tripartition(scores, 0.6, 0.5, layout);
  ASSERT_TRUE(std::find(mask.parties[0].n.begin(), mask.parties[0].n.end(), 9) !=
              mask.parties[0].n.end());
  // Feature 9 acquires a strong dependence: top score, significant p-value
  // computed by the permutation oracle on a planted table.
  std::vector<double> shifted = combined;
  shifted[9] = 99.0;
  ScoreSet scores2 = scores_from(shifted, layout);
  RngStream rng(3);
  std::vector<int> bins, s;
  for (int i = 0; i < 200; ++i) {
    const int group = static_cast<int>(rng.uniform_index(2));
    s.push_back(group);
    bins.push_back(group);  // bin == group: maximal dependence
  }
  const double observed = score_from_table(dp::build_contingency(bins, s, 2)).hsic;
  for (auto& sc : scores2)
    sc.p_value = sc.feature == 9
                     ? hsic_permutation_pvalue(bins, s, 2, observed, 200, rng)
                     : 0.8;  // everything else clearly null
  RefreshPolicy policy;
  policy.fdr_q = 0.1;
  auto out = refresh_masks(mask, scores2, policy, layout);
  EXPECT_TRUE(std::find(out.mask.parties[0].m.begin(), out.mask.parties[0].m.end(), 9) !=
              out.mask.parties[0].m.end());
  // Same refresh with a null p-value is blocked by FDR control.
  ScoreSet scores3 = scores2;
  for (auto& sc : scores3) sc.p_value = 0.8;
  auto blocked = refresh_masks(mask, scores3, policy, layout);
  EXPECT_TRUE(std::find(blocked.mask.parties[0].n.begin(), blocked.mask.parties[0].n.end(), 9) !=
              blocked.mask.parties[0].n.end());
}

TEST(InterventionalValidate, DegenerateAndConstructedGenerators) {
  data::VerticalLayout layout;
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2, 3}};
  FeatureMask mask;
  mask.parties.resize(1);
  mask.parties[0].n = {0, 1};
  mask.parties[0].m = {2, 3};
  mask.parties[0].p = {3};
  RngStream rng(5);
  Matrix batch(20, 4);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 4; ++j) batch(i, j) = rng.normal();
  ValidationTolerances tol;
  tol.tol_response = 1e-3;

  // Identity generator: no N violation, every editable mediator flagged.
  auto [rep_id, mask_id] =
      interventional_validate(mask, [](const Matrix& x) { return x; }, batch, tol, layout);
  EXPECT_FALSE(rep_id.passed);
  EXPECT_EQ(rep_id.max_n_violation, 0.0);
  EXPECT_EQ(rep_id.unresponsive_m, (std::vector<int>{2}));
  // Revision demotes the unresponsive mediator to N; proxies stay in place.
  EXPECT_TRUE(std::find(mask_id.parties[0].n.begin(), mask_id.parties[0].n.end(), 2) !=
              mask_id.parties[0].n.end());
  EXPECT_EQ(mask_id.parties[0].p, (std::vector<int>{3}));

  // Generator adding a constant to the editable mediator: clean pass.
  auto [rep_ok, mask_ok] = interventional_validate(
      mask,
      [](const Matrix& x) {
        Matrix out = x;
        for (int i = 0; i < out.rows(); ++i) out(i, 2) += 0.25;
        return out;
      },
      batch, tol, layout);
  EXPECT_TRUE(rep_ok.passed);
  EXPECT_EQ(rep_ok.violated_n.size(), 0u);

  // Corrupted pipeline touching an N coordinate: violation flagged.
  auto [rep_bad, mask_bad] = interventional_validate(
      mask,
      [](const Matrix& x) {
        Matrix out = x;
        for (int i = 0; i < out.rows(); ++i) {
          out(i, 0) += 0.5;  // N coordinate edited
          out(i, 2) += 0.25;
        }
        return out;
      },
      batch, tol, layout);
  EXPECT_FALSE(rep_bad.passed);
  EXPECT_EQ(rep_bad.violated_n, (std::vector<int>{0}));

  // No generator available: report-only mode.
  auto [rep_none, mask_none] =
      interventional_validate(mask, nullptr, batch, tol, layout);
  EXPECT_TRUE(rep_none.report_only);
}

TEST(MaskFile, JsonRoundTripIsLossless) {
  data::VerticalLayout layout;
  layout.party_names = {"bank", "bureau"};
  layout.party_cols = {{0, 1, 2}, {3, 4}};
  FeatureMask mask;
  mask.version = 7;
  mask.rho_m = 0.6;
  mask.rho_p = 0.5;
  mask.score_hash = 0xabcdef;
  mask.parties.resize(2);
  mask.parties[0].n = {0};
  mask.parties[0].m = {1, 2};
  mask.parties[0].p = {2};
  mask.parties[1].n = {3, 4};
  std::vector<std::string> names = {"a", "b", "c", "d", "e"};
  nlohmann::json j = mask_to_json(mask, layout, names);
  FeatureMask back = mask_from_json(j, layout, names);
  EXPECT_EQ(back.version, mask.version);
  EXPECT_EQ(back.score_hash, mask.score_hash);
  EXPECT_EQ(back.parties[0].m, mask.parties[0].m);
  EXPECT_EQ(back.parties[0].p, mask.parties[0].p);
  EXPECT_EQ(back.parties[1].n, mask.parties[1].n);
  EXPECT_EQ(nlohmann::json::parse(j.dump()), j);
}

TEST(PredictorVariant, PlantedDependenceAndNullBehaviour) {
  RngStream rng(11);
  const int n = 400;
  Matrix zs(n, 1);
  Matrix party(n, 3);
  for (int i = 0; i < n; ++i) {
    const double s = i % 2 == 0 ? -1.0 : 1.0;
    zs(i, 0) = s;
    party(i, 0) = rng.normal();            // independent of everything
    party(i, 1) = s + 0.1 * rng.normal();  // deterministic function of s
    party(i, 2) = 3.0;                     // degenerate constant target
  }
  const int half = n / 2;
  std::vector<int> tr, te;
  for (int i = 0; i < half; ++i) tr.push_back(i);
  for (int i = half; i < n; ++i) te.push_back(i);
  auto deltas = score_predictor_variant(party.take_rows(tr), party.take_rows(te),
                                        zs.take_rows(tr), zs.take_rows(te));
  EXPECT_NEAR(deltas[0], 0.0, 0.05);  // independent feature: no risk change
  EXPECT_LT(deltas[1], -0.5);         // planted dependence: risk drops sharply
  EXPECT_DOUBLE_EQ(deltas[2], 0.0);   // constant target recorded as zero

  // Constant sketch column carries no information: delta collapses to zero.
  Matrix zconst(n, 1, 1.0);
  auto null_deltas = score_predictor_variant(party.take_rows(tr), party.take_rows(te),
                                             zconst.take_rows(tr), zconst.take_rows(te));
  EXPECT_NEAR(null_deltas[1], 0.0, 1e-6);
}

TEST(RankMonotonicity, RaisingAScoreNeverDemotes) {
  data::VerticalLayout layout;
  layout.party_names = {"a"};
  layout.party_cols = {{0, 1, 2, 3, 4, 5}};
  std::vector<double> combined = {6, 5, 4, 3, 2, 1};
  ScoreSet base = scores_from(combined, layout);
  FeatureMask m1 = tripartition(base, 0.5, 0.5, layout);
  const bool was_mediator = std::find(m1.parties[0].m.begin(), m1.parties[0].m.end(), 2) !=
                            m1.parties[0].m.end();
  ASSERT_TRUE(was_mediator);
  combined[2] = 10.0;  // raise its score, everything else fixed
  FeatureMask m2 = tripartition(scores_from(combined, layout), 0.5, 0.5, layout);
  EXPECT_TRUE(std::find(m2.parties[0].m.begin(), m2.parties[0].m.end(), 2) !=
              m2.parties[0].m.end());
}

}  // namespace
}  // namespace sccvfl::discovery
