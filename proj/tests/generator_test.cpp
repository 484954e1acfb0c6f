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

#include "sccvfl/generator.hpp"
#include "sccvfl/gradcheck.hpp"

namespace sccvfl::cfgen {
namespace {

Matrix random_matrix(int r, int c, RngStream& rng, double mean = 0.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = mean + rng.normal();
  return m;
}

// Party with 6 columns: N = {0,1}, M = {2,3,4,5}, P = {4,5}.
PartyCoords test_coords() {
  discovery::PartyMask pm;
  pm.n = {0, 1};
  pm.m = {2, 3, 4, 5};
  pm.p = {4, 5};
  return PartyCoords::from_mask({0, 1, 2, 3, 4, 5}, pm);
}

struct Fixture {
  PartyCoords coords = test_coords();
  GeneratorParams gen;
  AdversaryParams adv;
  Matrix x, z_cur, z_tgt, context, ref;
  std::vector<int> s;

  explicit Fixture(std::uint64_t seed = 5, int rows = 12) {
    RngStream rng(seed);
    GeneratorDims dims;
    dims.latent_dim = 3;
    dims.hidden = 8;
    dims.sketch_dim = 2;
    dims.context_dim = 4;
    RngStream gs = RngStream::substream(seed, "gen");
    gen = make_generator(coords, dims, 0.3, 1, gs);
    RngStream as = RngStream::substream(seed, "adv");
    adv = make_adversary(coords, 8, 2, 1.0, as);
    x = random_matrix(rows, 6, rng);
    z_cur = random_matrix(rows, 2, rng);
    z_tgt = random_matrix(rows, 2, rng);
    context = random_matrix(rows, 4, rng);
    ref = random_matrix(rows, 4, rng, 0.2);
    for (int i = 0; i < rows; ++i) s.push_back(i % 2);
  }
};

TEST(PartyCoords, LocalBookkeeping) {
  PartyCoords c = test_coords();
  EXPECT_EQ(c.n, (std::vector<int>{0, 1}));
  EXPECT_EQ(c.m, (std::vector<int>{2, 3, 4, 5}));
  EXPECT_EQ(c.editable, (std::vector<int>{2, 3}));
  EXPECT_EQ(c.editable_in_m, (std::vector<int>{0, 1}));
  EXPECT_EQ(c.proxy_in_m, (std::vector<int>{2, 3}));
}

TEST(GenerateCf, FixedCoordinatesAreBitIdentical) {
  Fixture f;
  const Matrix cf = generate_cf(f.x, f.gen, 1, f.z_cur, f.z_tgt, f.context);
  for (int i = 0; i < f.x.rows(); ++i) {
    EXPECT_EQ(cf(i, 0), f.x(i, 0));
    EXPECT_EQ(cf(i, 1), f.x(i, 1));
    EXPECT_EQ(cf(i, 4), f.x(i, 4));  // proxies pass through unchanged
    EXPECT_EQ(cf(i, 5), f.x(i, 5));
  }
  // Editable mediators move (random init, nonzero scale).
  double moved = 0.0;
  for (int i = 0; i < f.x.rows(); ++i) moved += std::fabs(cf(i, 2) - f.x(i, 2));
  EXPECT_GT(moved, 0.0);
}

TEST(GenerateCf, ZeroScaleIsIdentityEverywhere) {
  Fixture f;
  f.gen.cf_scale = 0.0;
  const Matrix cf = generate_cf(f.x, f.gen, 1, f.z_cur, f.z_tgt, f.context);
  EXPECT_EQ(max_abs_diff(cf, f.x), 0.0);
}

TEST(GenerateCf, VersionMismatchIsContractError) {
  Fixture f;
  try {
    generate_cf(f.x, f.gen, 2, f.z_cur, f.z_tgt, f.context);
    FAIL() << "expected contract error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Error::Kind::kContract);
  }
}

TEST(GenLoss, IdentityComponentIsExactlyZero) {
  Fixture f;
  Matrix eps(f.x.rows(), f.gen.latent_dim);
  GenLossWeights w;
  auto r = gen_loss(f.x, f.gen, f.adv, f.z_cur, f.z_tgt, f.context, f.ref, f.s, w, 1.0, eps);
  EXPECT_EQ(r.comps.identity, 0.0);
  EXPECT_FALSE(r.comps.empty_mediators);
  EXPECT_TRUE(std::isfinite(r.comps.total));
  EXPECT_GE(r.comps.likelihood, 0.0);  // KL >= 0 and the NLL constant dominates on small errors
}

TEST(GenLoss, ChanceAdversaryGivesLogTwoLeakage) {
  Fixture f;
  // Zero the adversary so every logit ties and p_true = 1/2 on a balanced batch.
  for (auto& layer : f.adv.net.layers) {
    layer.w = Matrix(layer.w.rows(), layer.w.cols());
    for (auto& b : layer.b) b = 0.0;
  }
  Matrix eps(f.x.rows(), f.gen.latent_dim);
  GenLossWeights w;
  w.leakage = 2.0;
  auto r = gen_loss(f.x, f.gen, f.adv, f.z_cur, f.z_tgt, f.context, f.ref, f.s, w, 1.0, eps);
  EXPECT_NEAR(r.comps.leakage, 2.0 * std::log(2.0), 1e-9);
}

TEST(GenLoss, EmptyMediatorSetWarnsWithZeroTerms) {
  discovery::PartyMask pm;
  pm.n = {0, 1, 2};
  PartyCoords coords = PartyCoords::from_mask({0, 1, 2}, pm);
  GeneratorDims dims;
  dims.latent_dim = 2;
  dims.hidden = 4;
  dims.sketch_dim = 2;
  dims.context_dim = 0;
  RngStream rng(3);
  GeneratorParams gen = make_generator(coords, dims, 0.2, 1, rng);
  AdversaryParams adv = make_adversary(coords, 4, 2, 1.0, rng);
  Matrix x = random_matrix(6, 3, rng);
  Matrix z = random_matrix(6, 2, rng);
  Matrix eps(6, 2);
  auto r = gen_loss(x, gen, adv, z, z, Matrix(6, 0), Matrix(), {0, 1, 0, 1, 0, 1},
                    GenLossWeights{}, 1.0, eps);
  EXPECT_TRUE(r.comps.empty_mediators);
  EXPECT_EQ(r.comps.total, 0.0);
}

// Finite differences against the differentiable part of the objective
// (identity + likelihood + support).  The leakage path is checked separately
// because of the gradient reversal.
TEST(GenLoss, GeneratorGradientsMatchFiniteDifferences) {
  Fixture f(7, 8);
  Matrix eps(f.x.rows(), f.gen.latent_dim);
  RngStream noise(11);
  for (int i = 0; i < eps.rows(); ++i)
    for (int l = 0; l < eps.cols(); ++l) eps(i, l) = noise.normal();
  GenLossWeights w;
  w.leakage = 0.0;  // reversed path excluded here
  const double sigma = 1.2;
  auto r = gen_loss(f.x, f.gen, f.adv, f.z_cur, f.z_tgt, f.context, f.ref, f.s, w, sigma, eps);
  auto loss_value = [&]() {
    auto rr = gen_loss(f.x, f.gen, f.adv, f.z_cur, f.z_tgt, f.context, f.ref, f.s, w, sigma, eps);
    return rr.comps.total;
  };
  TensorViews params = mlp_params(f.gen.encoder);
  TensorViews dec = mlp_params(f.gen.decoder);
  params.insert(params.end(), dec.begin(), dec.end());
  TensorViews grads = grad_views(r.d_encoder);
  TensorViews dgrads = grad_views(r.d_decoder);
  grads.insert(grads.end(), dgrads.begin(), dgrads.end());
  GradCheckOptions opt;
  opt.max_coords_per_tensor = 60;
  auto report = finite_diff_check(loss_value, params, grads, opt);
  EXPECT_LT(report.max_rel_err, 1e-4)
      << "worst tensor " << report.worst_tensor << " analytic " << report.analytic_at_worst
      << " numeric " << report.numeric_at_worst;
}

TEST(GenLoss, AdversaryGradientMatchesItsCrossEntropy) {
  Fixture f(9, 8);
  Matrix eps(f.x.rows(), f.gen.latent_dim);
  GenLossWeights w;
  w.likelihood = 0.0;
  w.support = 0.0;
  w.leakage = 0.7;
  const double sigma = 1.0;
  auto r = gen_loss(f.x, f.gen, f.adv, f.z_cur, f.z_tgt, f.context, f.ref, f.s, w, sigma, eps);
  // The adversary descends its own (unscaled) cross-entropy.
  auto ce_value = [&]() {
    auto rr = gen_loss(f.x, f.gen, f.adv, f.z_cur, f.z_tgt, f.context, f.ref, f.s, w, sigma, eps);
    const Matrix logits = mlp_forward(f.adv.net, rr.adversarial_view, false, nullptr);
    return softmax_xent(logits, f.s).loss;
  };
  TensorViews params = mlp_params(f.adv.net);
  TensorViews grads = grad_views(r.d_adversary);
  GradCheckOptions opt;
  opt.max_coords_per_tensor = 60;
  auto report = finite_diff_check(ce_value, params, grads, opt);
  EXPECT_LT(report.max_rel_err, 1e-4);
}

TEST(GenLoss, GeneratorLeakageGradientIsReversedCrossEntropy) {
  Fixture f(13, 8);
  Matrix eps(f.x.rows(), f.gen.latent_dim);
  GenLossWeights w;
  w.likelihood = 0.0;
  w.support = 0.0;
  w.leakage = 0.5;
  const double sigma = 1.0;
  auto r = gen_loss(f.x, f.gen, f.adv, f.z_cur, f.z_tgt, f.context, f.ref, f.s, w, sigma, eps);
  // Through the GRL, the generator receives the gradient of the EXTERNALLY
  // NEGATED adversary cross-entropy (lambda_grl = 1).
  auto negated_ce = [&]() {
    auto rr = gen_loss(f.x, f.gen, f.adv, f.z_cur, f.z_tgt, f.context, f.ref, f.s, w, sigma, eps);
    const Matrix logits = mlp_forward(f.adv.net, rr.adversarial_view, false, nullptr);
    return -w.leakage * softmax_xent(logits, f.s).loss;
  };
  TensorViews params = mlp_params(f.gen.encoder);
  TensorViews dec = mlp_params(f.gen.decoder);
  params.insert(params.end(), dec.begin(), dec.end());
  TensorViews grads = grad_views(r.d_encoder);
  TensorViews dgrads = grad_views(r.d_decoder);
  grads.insert(grads.end(), dgrads.begin(), dgrads.end());
  GradCheckOptions opt;
  opt.max_coords_per_tensor = 50;
  auto report = finite_diff_check(negated_ce, params, grads, opt);
  EXPECT_LT(report.max_rel_err, 1e-4);
}

TEST(TrainGenerator, DescendsAndIsDeterministic) {
  Fixture make(21, 40);
  GenTrainConfig cfg;
  cfg.epochs = 40;
  cfg.weights.leakage = 0.0;
  cfg.weights.likelihood = 0.2;
  auto run = [&](GeneratorParams* g, AdversaryParams* a) {
    RngStream rng = RngStream::substream(77, "gen/train");
    return train_generator(g, a, make.x, make.z_cur, make.z_tgt, make.context, make.ref, make.s,
                           cfg, rng);
  };
  Fixture f1(21, 40), f2(21, 40);
  auto r1 = run(&f1.gen, &f1.adv);
  auto r2 = run(&f2.gen, &f2.adv);
  ASSERT_FALSE(r1.loss_history.empty());
  EXPECT_LT(r1.loss_history.back(), r1.loss_history.front());  // descent sanity
  for (std::size_t l = 0; l < f1.gen.encoder.layers.size(); ++l)
    EXPECT_EQ(max_abs_diff(f1.gen.encoder.layers[l].w, f2.gen.encoder.layers[l].w), 0.0);
}

TEST(TrainGenerator, LeakageWeightSuppressesPlantedProxySignal) {
  // Proxies carry the group verbatim; the co-trained adversary stays sharp
  // without leakage control and collapses toward chance with it.
  auto build = [](double eta, std::uint64_t seed) {
    const int rows = 80;
    RngStream rng(seed);
    PartyCoords coords = test_coords();
    Matrix x = random_matrix(rows, 6, rng);
    std::vector<int> s;
    for (int i = 0; i < rows; ++i) s.push_back(i % 2);
    for (int i = 0; i < rows; ++i) {
      x(i, 4) = s[static_cast<std::size_t>(i)] * 2.0 - 1.0;  // proxy = s exactly
      x(i, 5) = s[static_cast<std::size_t>(i)] * 2.0 - 1.0;
    }
    GeneratorDims dims;
    dims.latent_dim = 3;
    dims.hidden = 16;
    dims.sketch_dim = 2;
    dims.context_dim = 0;
    RngStream gs = RngStream::substream(seed, "gen");
    GeneratorParams gen = make_generator(coords, dims, 1.0, 1, gs);
    RngStream as = RngStream::substream(seed, "adv");
    AdversaryParams adv = make_adversary(coords, 16, 2, 1.0, as);
    Matrix z_cur = random_matrix(rows, 2, rng), z_tgt = random_matrix(rows, 2, rng);
    Matrix ref = random_matrix(rows, 4, rng);
    GenTrainConfig cfg;
    cfg.epochs = 250;
    cfg.weights.leakage = eta;
    cfg.weights.support = 0.0;
    cfg.weights.likelihood = 0.1;
    RngStream tr = RngStream::substream(seed, "gen/train");
    train_generator(&gen, &adv, x, z_cur, z_tgt, Matrix(rows, 0), ref, s, cfg, tr);
    Matrix eps(rows, 3);
    auto view = gen_loss(x, gen, adv, z_cur, z_tgt, Matrix(rows, 0), ref, s, cfg.weights, 1.0, eps)
                    .adversarial_view;
    auto ba = adversary_eval(adv, view, s, 2);
    return ba.value_or(0.5);
  };
  double with_eta = 0.0, without_eta = 0.0;
  const int seeds = 4;
  for (int k = 0; k < seeds; ++k) {
    with_eta += build(8.0, 1000 + static_cast<std::uint64_t>(k));
    without_eta += build(0.0, 1000 + static_cast<std::uint64_t>(k));
  }
  with_eta /= seeds;
  without_eta /= seeds;
  EXPECT_GT(without_eta, 0.75);             // unguarded decoder keeps most of the planted signal
  EXPECT_LT(with_eta, without_eta - 0.20);  // leakage control pushes toward chance
}

TEST(AdversaryEval, ConstantPredictionIsExactlyChance) {
  Fixture f;
  for (auto& layer : f.adv.net.layers) {
    layer.w = Matrix(layer.w.rows(), layer.w.cols());
    for (auto& b : layer.b) b = 0.0;
  }
  Matrix inputs = random_matrix(20, 4, *(new RngStream(3)));
  std::vector<int> s;
  for (int i = 0; i < 20; ++i) s.push_back(i % 2);
  auto ba = adversary_eval(f.adv, inputs, s, 2);
  ASSERT_TRUE(ba.has_value());
  EXPECT_DOUBLE_EQ(*ba, 0.5);  // argmax ties resolve to class 0: perfect on one group, zero on the other
}

TEST(AdversaryEval, SingleGroupBatchIsUnavailable) {
  Fixture f;
  RngStream rng(5);
  Matrix inputs = random_matrix(10, 4, rng);
  std::vector<int> s(10, 0);
  EXPECT_FALSE(adversary_eval(f.adv, inputs, s, 2).has_value());
}

TEST(ValiditySummaries, HandValues) {
  PartyCoords coords = test_coords();
  RngStream rng(7);
  Matrix x = random_matrix(10, 6, rng);
  Matrix gen = x;
  // Identity generator: v_id = 0 and support vs own mediators ~ 0.
  AdversaryParams adv = make_adversary(coords, 8, 2, 1.0, rng);
  std::vector<int> s;
  for (int i = 0; i < 10; ++i) s.push_back(i % 2);
  auto v0 = validity_summaries(x, gen, coords, adv, x.take_cols(coords.m), s, 2);
  EXPECT_EQ(v0.v_id, 0.0);
  EXPECT_NEAR(v0.v_supp, 0.0, 1e-9);
  // Perturb one N coordinate by 0.1 everywhere: mean square over N cells.
  Matrix gen2 = x;
  for (int i = 0; i < 10; ++i) gen2(i, 0) += 0.1;
  auto v1 = validity_summaries(x, gen2, coords, adv, x.take_cols(coords.m), s, 2);
  EXPECT_NEAR(v1.v_id, 0.01 / 2.0, 1e-12);  // |N| = 2
}

}  // namespace
}  // namespace sccvfl::cfgen
