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

#ifndef SCCVFL_TRAIN_HPP_
#define SCCVFL_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sccvfl/engine.hpp"

namespace sccvfl::engine {

// Named rng substreams drawn from the run seed.  The draw order per epoch is
// part of the determinism contract: init streams are consumed once at
// construction, the dropout stream once per training forward, the generator
// noise stream once per generator step, and the target/shuffle streams once
// per counterfactual round.
//   init/backbone, init/party/<p>, init/head, init/repadv,
//   init/gen/<version>/<p>, init/genadv/<version>/<p>,
//   dropout, gen/noise, cf/target, cf/shuffle, dp, secagg
struct TrainContext {
  data::Dataset train, val, test;
  data::VerticalLayout layout;
};

namespace train_detail {

inline Matrix group_column_means(const Matrix& x, const std::vector<int>& s, int num_groups) {
  Matrix means(num_groups, x.cols());
  std::vector<int> counts(static_cast<std::size_t>(num_groups), 0);
  for (int i = 0; i < x.rows(); ++i) {
    counts[static_cast<std::size_t>(s[static_cast<std::size_t>(i)])]++;
    for (int j = 0; j < x.cols(); ++j) means(s[static_cast<std::size_t>(i)], j) += x(i, j);
  }
  for (int g = 0; g < num_groups; ++g)
    if (counts[static_cast<std::size_t>(g)] > 0)
      for (int j = 0; j < x.cols(); ++j) means(g, j) /= counts[static_cast<std::size_t>(g)];
  return means;
}

// Real mediator rows for the per-row target groups; the generator's support
// reference.
inline Matrix reference_mediators(const Matrix& train_x, const std::vector<int>& train_s,
                                  const std::vector<int>& med_cols, const std::vector<int>& targets,
                                  int num_groups, RngStream& rng) {
  std::vector<std::vector<int>> pool(static_cast<std::size_t>(num_groups));
  for (std::size_t i = 0; i < train_s.size(); ++i)
    pool[static_cast<std::size_t>(train_s[i])].push_back(static_cast<int>(i));
  std::vector<int> rows;
  rows.reserve(targets.size());
  for (int t : targets) {
    const auto& p = pool[static_cast<std::size_t>(t)];
    check(!p.empty(), Error::Kind::kSplit, "no reference rows for target group");
    rows.push_back(p[rng.uniform_index(p.size())]);
  }
  return train_x.take_rows(rows).take_cols(med_cols);
}

struct PartySlices {
  std::vector<std::vector<int>> cols;  // sorted party columns (assembled space)
  std::vector<Matrix> train_slices;
};

inline PartySlices make_slices(const Matrix& train_x, const data::VerticalLayout& layout) {
  PartySlices s;
  for (const auto& cols : layout.party_cols) {
    std::vector<int> sorted = cols;
    std::sort(sorted.begin(), sorted.end());
    s.cols.push_back(sorted);
    s.train_slices.push_back(train_x.take_cols(sorted));
  }
  return s;
}

}  // namespace train_detail

// Full three-phase training for one (method, seed) cell.
//   Phase 1 (discovery): DP-released statistics, FDR-controlled scores, mask
//   initialization, encoders untouched.
//   Phase 2 (epochs below the warmup count): supervised warm start of the
//   backbone and head plus party-local generator/adversary training; no
//   consistency term.
//   Phase 3 (joint): consistency ramp, periodic mask refresh with hysteresis,
//   early stopping on the composite validation objective
//   logloss + SCG + FR/100.
inline TrainOutput train(const TrainContext& ctx, const MethodConfig& method, const LossWeights& w,
                         const TrainHyper& hyper, const DpConfig& dp_cfg, std::uint64_t seed,
                         dp::AuditLog* audit = nullptr) {
  TrainOutput out;
  out.seed = seed;
  const data::Dataset& train_ds = ctx.train;
  const data::VerticalLayout& layout = ctx.layout;
  const int d = train_ds.cols();
  const int m = layout.parties();
  const int num_classes = train_ds.num_classes;
  const int num_groups = train_ds.num_groups;

  RngStream init_backbone = RngStream::substream(seed, "init/backbone");
  RngStream init_head = RngStream::substream(seed, "init/head");
  RngStream dropout_rng = RngStream::substream(seed, "dropout");
  RngStream gen_noise = RngStream::substream(seed, "gen/noise");
  RngStream target_rng = RngStream::substream(seed, "cf/target");
  RngStream shuffle_rng = RngStream::substream(seed, "cf/shuffle");
  RngStream dp_rng = RngStream::substream(seed, "dp");
  RngStream secagg_rng = RngStream::substream(seed, "secagg");
  RngStream batch_rng = RngStream::substream(seed, "batch");

  // --- model construction -------------------------------------------------
  ModelBundle bundle;
  bundle.num_classes = num_classes;
  bundle.num_groups = num_groups;
  bundle.per_party = hyper.per_party_encoders;
  if (bundle.per_party) {
    const int per_width = std::max(4, hyper.hidden / std::max(1, m));
    for (int p = 0; p < m; ++p) {
      RngStream s = RngStream::substream(seed, "init/party", static_cast<std::uint64_t>(p));
      bundle.party_encoders.push_back(
          make_mlp({static_cast<int>(layout.party_cols[static_cast<std::size_t>(p)].size()),
                    per_width, per_width},
                   Act::kRelu, Act::kRelu, hyper.dropout, s));
    }
  } else {
    bundle.backbone = make_mlp({d, hyper.hidden, hyper.hidden}, Act::kRelu, Act::kRelu,
                               hyper.dropout, init_backbone);
  }
  bundle.head = make_mlp({bundle.repr_width(), num_classes}, Act::kLinear, Act::kLinear, 0.0,
                         init_head);

  // --- discovery (phase 1) -------------------------------------------------
  const bool needs_mask = method.mask_mode == MaskMode::kMediators ||
                          method.mask_mode == MaskMode::kRandomShuffle ||
                          method.mask_mode == MaskMode::kMediatorsPerClient;
  const bool needs_sketch = method.use_gen || method.use_cons;
  const int tables_per_pass = d * (num_groups > 2 ? num_groups : 1);
  dp::BudgetLedger ledger((1 + dp_cfg.max_refreshes) * tables_per_pass + 1);

  CfPipeline cf;
  cf.cf_scale = hyper.cf_scale;
  std::optional<DiscoveryResult> disco;
  if (needs_mask) {
    disco = run_discovery(train_ds, layout, dp_cfg, ledger, dp_rng, audit, &out.comm);
    cf.mask = disco->mask;
  } else if (method.mask_mode == MaskMode::kAll) {
    cf.mask = all_mediator_mask(layout);
  }
  cf.mode = method.mask_mode;
  if (cf.active() && !method.proxy_partition)
    for (auto& pm : cf.mask.parties) pm.p.clear();  // policy-blind: no proxy handling
  if (needs_sketch) {
    cf.sketch = dp::dp_sketch_embedding(num_groups, dp_cfg.sigma, dp_cfg.sketch_dim, dp_cfg.delta,
                                        dp_rng, ledger);
    out.comm.charge_aux(static_cast<std::uint64_t>(num_groups) * dp_cfg.sketch_dim);
  }
  if (cf.active())
    cf.group_mediator_means = train_detail::group_column_means(train_ds.x, train_ds.s, num_groups);

  // --- party generators and adversaries -----------------------------------
  train_detail::PartySlices slices = train_detail::make_slices(train_ds.x, layout);
  std::optional<OptState> gen_opt, genadv_opt;
  if (method.use_gen && cf.active()) {
    for (int p = 0; p < m; ++p) {
      cfgen::PartyCoords coords = cfgen::PartyCoords::from_mask(slices.cols[static_cast<std::size_t>(p)],
                                                                cf.mask.parties[static_cast<std::size_t>(p)]);
      cfgen::GeneratorDims dims;
      dims.latent_dim = hyper.latent_dim;
      dims.hidden = std::max(16, hyper.hidden / 2);
      dims.sketch_dim = dp_cfg.sketch_dim;
      dims.context_dim = bundle.repr_width();
      RngStream gs = RngStream::substream(seed, "init/gen/0", static_cast<std::uint64_t>(p));
      bundle.generators.push_back(
          cfgen::make_generator(coords, dims, hyper.cf_scale, cf.mask.version, gs));
      RngStream as = RngStream::substream(seed, "init/genadv/0", static_cast<std::uint64_t>(p));
      bundle.party_advs.push_back(
          cfgen::make_adversary(coords, std::max(16, hyper.hidden / 2), num_groups, 1.0, as));
    }
    gen_opt.emplace(OptHyper{.lr = hyper.lr_generator, .variant = OptVariant::kAdam});
    genadv_opt.emplace(OptHyper{.lr = hyper.lr_adversary, .variant = OptVariant::kAdam});
  }
  if (method.use_adv) {
    RngStream rs = RngStream::substream(seed, "init/repadv");
    bundle.rep_adversary = make_mlp({bundle.repr_width(), hyper.hidden, num_groups}, Act::kRelu,
                                    Act::kLinear, 0.0, rs);
    bundle.has_rep_adversary = true;
  }

  // --- optimizers -----------------------------------------------------------
  OptState opt_shared(OptHyper{.lr = hyper.lr_backbone,
                               .weight_decay = hyper.weight_decay,
                               .variant = hyper.backbone_opt});
  std::optional<OptState> opt_repadv;
  if (method.use_adv)
    opt_repadv.emplace(OptHyper{.lr = hyper.lr_adversary, .variant = OptVariant::kAdam});

  auto shared_params = [&bundle]() {
    TensorViews v;
    if (bundle.per_party) {
      for (auto& e : bundle.party_encoders) {
        TensorViews pv = mlp_params(e);
        v.insert(v.end(), pv.begin(), pv.end());
      }
    } else {
      v = mlp_params(bundle.backbone);
    }
    TensorViews hv = mlp_params(bundle.head);
    v.insert(v.end(), hv.begin(), hv.end());
    return v;
  };

  const double mmd_sigma_ref = [&]() {
    if (!method.use_gen || !cf.active()) return 1.0;
    const auto med = cf.mask.all_mediators();
    if (med.size() < 1 || train_ds.rows() < 2) return 1.0;
    return median_bandwidth(train_ds.x.take_cols(med));
  }();

  // --- training loop --------------------------------------------------------
  const int es_start = method.use_cons ? w.warmup_epochs + w.ramp_epochs : 0;
  double best_composite = 1e300;
  int best_epoch = -1, since_best = 0;
  ModelBundle best_bundle = bundle;
  CfPipeline best_cf = cf;
  int refreshes_done = 0;
  int last_refresh_epoch = -1;

  for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    const bool joint = method.use_cons && epoch >= w.warmup_epochs;
    const std::string phase = joint ? "joint" : "generator";
    const double lam = method.use_cons ? w.lam_cons(epoch) : 0.0;

    // Mask refresh at fixed intervals inside the joint phase.
    if (joint && needs_mask && refreshes_done < dp_cfg.max_refreshes &&
        epoch >= w.warmup_epochs + dp_cfg.refresh_interval &&
        (last_refresh_epoch < 0 ||
         epoch - std::max(last_refresh_epoch, w.warmup_epochs) >= dp_cfg.refresh_interval) &&
        ledger.used() + tables_per_pass <= ledger.max_releases()) {
      DiscoveryResult rescored = run_discovery(train_ds, layout, dp_cfg, ledger, dp_rng, audit,
                                               &out.comm);
      discovery::RefreshPolicy policy;
      policy.interval = dp_cfg.refresh_interval;
      policy.hysteresis_margin = dp_cfg.hysteresis_margin;
      policy.fdr_q = dp_cfg.fdr_q;
      auto outcome = discovery::refresh_masks(cf.mask, rescored.scores, policy, layout);
      const bool changed = !outcome.changes.empty();
      if (!method.proxy_partition)
        for (auto& pm : outcome.mask.parties) pm.p.clear();
      cf.mask = outcome.mask;
      ++refreshes_done;
      last_refresh_epoch = epoch;
      if (audit)
        audit->append("{\"event\":\"mask_refresh\",\"epoch\":" + std::to_string(epoch) +
                      ",\"version\":" + std::to_string(cf.mask.version) + ",\"changes\":" +
                      std::to_string(outcome.changes.size()) + "}");
      for (const auto& change : outcome.changes) out.notes.push_back(change);
      if (method.use_gen && !bundle.generators.empty()) {
        if (changed) {
          // Column sets moved: rebuild the affected generators and re-fit
          // briefly against the new mask before the joint loss resumes.
          bundle.generators.clear();
          bundle.party_advs.clear();
          for (int p = 0; p < m; ++p) {
            cfgen::PartyCoords coords = cfgen::PartyCoords::from_mask(
                slices.cols[static_cast<std::size_t>(p)], cf.mask.parties[static_cast<std::size_t>(p)]);
            cfgen::GeneratorDims dims;
            dims.latent_dim = hyper.latent_dim;
            dims.hidden = std::max(16, hyper.hidden / 2);
            dims.sketch_dim = dp_cfg.sketch_dim;
            dims.context_dim = bundle.repr_width();
            RngStream gs = RngStream::substream(seed, "init/gen/" + std::to_string(cf.mask.version),
                                                static_cast<std::uint64_t>(p));
            bundle.generators.push_back(
                cfgen::make_generator(coords, dims, hyper.cf_scale, cf.mask.version, gs));
            RngStream as = RngStream::substream(seed, "init/genadv/" + std::to_string(cf.mask.version),
                                                static_cast<std::uint64_t>(p));
            bundle.party_advs.push_back(
                cfgen::make_adversary(coords, std::max(16, hyper.hidden / 2), num_groups, 1.0, as));
          }
          gen_opt.emplace(OptHyper{.lr = hyper.lr_generator, .variant = OptVariant::kAdam});
          genadv_opt.emplace(OptHyper{.lr = hyper.lr_adversary, .variant = OptVariant::kAdam});
        } else {
          for (auto& g : bundle.generators) g.mask_version = cf.mask.version;
        }
      }
    }

    // --- one full-batch training step (minibatched when hyper.batch > 0) ---
    const Matrix& x = train_ds.x;
    const std::vector<int>& y = train_ds.y;
    const std::vector<int>& s = train_ds.s;
    std::vector<int> batch_order(static_cast<std::size_t>(x.rows()));
    for (int i = 0; i < x.rows(); ++i) batch_order[static_cast<std::size_t>(i)] = i;
    const int batch_size = hyper.batch > 0 ? hyper.batch : x.rows();
    if (hyper.batch > 0) batch_rng.shuffle(batch_order.begin(), batch_order.end());

    double epoch_task = 0.0, epoch_cons = 0.0, epoch_adv = 0.0, epoch_gen = 0.0;
    int steps = 0;
    for (int start = 0; start < x.rows(); start += batch_size) {
      const int stop = std::min(x.rows(), start + batch_size);
      std::vector<int> rows(batch_order.begin() + start, batch_order.begin() + stop);
      const Matrix xb = x.take_rows(rows);
      std::vector<int> yb, sb;
      for (int i : rows) {
        yb.push_back(y[static_cast<std::size_t>(i)]);
        sb.push_back(s[static_cast<std::size_t>(i)]);
      }

      const bool cf_round = joint && cf.active();
      const std::vector<int> targets =
          cf_round ? draw_targets(sb, num_groups, &target_rng) : sb;
      RoundResult r = counterfactual_round(bundle, layout, xb, sb, targets, cf_round ? cf : CfPipeline{},
                                           true, &dropout_rng, method.use_gen ? &gen_noise : nullptr,
                                           &shuffle_rng, &out.comm);

      const auto xent = softmax_xent(r.logits, yb);
      epoch_task += xent.loss;
      Matrix dlogits = xent.dlogits;
      Matrix dlogits_cf;
      if (cf_round && lam > 0.0) {
        const SccLoss scc = scc_loss(r.logits, r.logits_cf, w.norm_p);
        epoch_cons += scc.value;
        Matrix add = scc.dlogits;
        add *= lam;
        dlogits += add;
        dlogits_cf = scc.dlogits_cf;
        dlogits_cf *= lam;
      } else if (cf_round) {
        epoch_cons += scc_loss(r.logits, r.logits_cf, w.norm_p).value;
      }

      // Backward through the head and fusion for the original pass.
      MlpGrads head_g = mlp_backward(bundle.head, r.head_cache, dlogits);
      Matrix dz = head_g.dx;

      // Representation adversary: the GRL total is lam_adv * CE(adv(GRL(z)), s).
      MlpGrads repadv_g;
      if (method.use_adv) {
        MlpCache ac;
        const Matrix alogits = mlp_forward(bundle.rep_adversary, r.z, false, nullptr, &ac);
        const auto ax = softmax_xent(alogits, sb);
        epoch_adv += ax.loss;
        Matrix dal = ax.dlogits;
        dal *= w.lam_adv;
        repadv_g = mlp_backward(bundle.rep_adversary, ac, dal);
        dz += grl_backward(repadv_g.dx, 1.0);  // reversed into the encoders
      }

      FuseGrads fuse_g = fuse_backward(bundle, layout, r.fuse_cache, dz);
      if (!dlogits_cf.empty()) {
        MlpGrads head_g_cf = mlp_backward(bundle.head, r.head_cache_cf, dlogits_cf);
        head_g.add(head_g_cf);
        FuseGrads fuse_g_cf = fuse_backward(bundle, layout, r.fuse_cache_cf, head_g_cf.dx);
        if (bundle.per_party) {
          for (std::size_t p = 0; p < fuse_g.parties.size(); ++p)
            fuse_g.parties[p].add(fuse_g_cf.parties[p]);
        } else {
          fuse_g.backbone.add(fuse_g_cf.backbone);
        }
      }

      TensorViews params = shared_params();
      TensorViews grads;
      if (bundle.per_party) {
        for (auto& pg : fuse_g.parties) {
          TensorViews gv = grad_views(pg);
          grads.insert(grads.end(), gv.begin(), gv.end());
        }
      } else {
        grads = grad_views(fuse_g.backbone);
      }
      TensorViews hg = grad_views(head_g);
      grads.insert(grads.end(), hg.begin(), hg.end());
      opt_shared.step(params, grads);
      out.comm.charge_model_step(bundle.shared_param_count());
      if (method.use_adv) {
        TensorViews ap = mlp_params(bundle.rep_adversary);
        TensorViews ag = grad_views(repadv_g);
        opt_repadv->step(ap, ag);
      }

      // Party-local generator/adversary joint step through GRL; the epoch's
      // serving counterfactuals above never touched parameters.
      if (method.use_gen && !bundle.generators.empty() && w.lam_gen > 0.0) {
        const std::vector<int> gen_targets = draw_targets(sb, num_groups, &target_rng);
        const Matrix z_cur = cf.sketch->embed_rows(sb);
        const Matrix z_tgt = cf.sketch->embed_rows(gen_targets);
        const Matrix context = r.z;  // detached fused representation
        TensorViews gparams, ggrads, aparams, agrads;
        std::vector<cfgen::GenLossResult> results(static_cast<std::size_t>(m));
        double gen_total = 0.0;
        for (int p = 0; p < m; ++p) {
          cfgen::GeneratorParams& gp = bundle.generators[static_cast<std::size_t>(p)];
          const Matrix slice = xb.take_cols(slices.cols[static_cast<std::size_t>(p)]);
          Matrix eps(slice.rows(), gp.latent_dim);
          for (int i = 0; i < eps.rows(); ++i)
            for (int l = 0; l < eps.cols(); ++l) eps(i, l) = gen_noise.normal();
          const Matrix ref = train_detail::reference_mediators(
              x, s, [&] {
                std::vector<int> local;
                for (int c : cf.mask.parties[static_cast<std::size_t>(p)].m) local.push_back(c);
                std::sort(local.begin(), local.end());
                return local;
              }(),
              gen_targets, num_groups, gen_noise);
          results[static_cast<std::size_t>(p)] =
              cfgen::gen_loss(slice, gp, bundle.party_advs[static_cast<std::size_t>(p)], z_cur, z_tgt,
                              context, ref, sb, w.gen_weights, mmd_sigma_ref, eps);
          gen_total += results[static_cast<std::size_t>(p)].comps.total;
          results[static_cast<std::size_t>(p)].d_encoder.scale(w.lam_gen);
          results[static_cast<std::size_t>(p)].d_decoder.scale(w.lam_gen);
          results[static_cast<std::size_t>(p)].d_adversary.scale(w.lam_gen);
          TensorViews ev = mlp_params(gp.encoder), dv = mlp_params(gp.decoder);
          gparams.insert(gparams.end(), ev.begin(), ev.end());
          gparams.insert(gparams.end(), dv.begin(), dv.end());
          TensorViews eg = grad_views(results[static_cast<std::size_t>(p)].d_encoder);
          TensorViews dg = grad_views(results[static_cast<std::size_t>(p)].d_decoder);
          ggrads.insert(ggrads.end(), eg.begin(), eg.end());
          ggrads.insert(ggrads.end(), dg.begin(), dg.end());
          TensorViews av = mlp_params(bundle.party_advs[static_cast<std::size_t>(p)].net);
          TensorViews ag2 = grad_views(results[static_cast<std::size_t>(p)].d_adversary);
          aparams.insert(aparams.end(), av.begin(), av.end());
          agrads.insert(agrads.end(), ag2.begin(), ag2.end());
        }
        epoch_gen += gen_total;
        gen_opt->step(gparams, ggrads);
        genadv_opt->step(aparams, agrads);
      }
      ++steps;
    }

    // --- validation and early stopping -------------------------------------
    EvalResult val = evaluate(bundle, layout, ctx.val, cf, seed, "val" + std::to_string(epoch),
                              &out.comm);
    const double composite = val.logloss + val.scg + val.fr / 100.0;

    HistoryRow row;
    row.epoch = epoch;
    row.phase = phase;
    row.train_loss = epoch_task / std::max(1, steps) + lam * epoch_cons / std::max(1, steps) +
                     w.lam_gen * epoch_gen / std::max(1, steps) +
                     w.lam_adv * epoch_adv / std::max(1, steps);
    row.val_acc = val.acc;
    row.val_logloss = val.logloss;
    row.val_scg = val.scg;
    row.val_fr = val.fr;
    row.lam_cons = lam;
    row.mask_version = cf.active() ? cf.mask.version : 0;
    row.feature_bytes = out.comm.feature_bytes;
    row.model_bytes = out.comm.model_bytes;
    out.history.push_back(row);
    check(std::isfinite(row.train_loss), Error::Kind::kOracle,
          "non-finite training loss at epoch " + std::to_string(epoch));

    if (epoch >= es_start) {
      if (composite < best_composite - 1e-12) {
        best_composite = composite;
        best_epoch = epoch;
        best_bundle = bundle;
        best_cf = cf;
        since_best = 0;
      } else {
        ++since_best;
        if (since_best > hyper.patience) {
          out.epochs_run = epoch + 1;
          break;
        }
      }
    }
    out.epochs_run = epoch + 1;
  }

  if (best_epoch >= 0) {
    bundle = best_bundle;
    cf = best_cf;
  } else {
    best_epoch = out.epochs_run - 1;
    best_composite = out.history.empty() ? 0.0 : out.history.back().val_logloss;
  }
  out.best_epoch = best_epoch;
  out.best_composite = best_composite;

  // --- calibration and final test metrics ----------------------------------
  {
    EvalResult val = evaluate(bundle, layout, ctx.val, CfPipeline{}, seed, "calib", nullptr);
    bundle.calibration = calibrate(val.logits, ctx.val.y);
    if (bundle.calibration.degenerate)
      out.notes.push_back("degenerate validation split: temperature fixed at 1");
  }
  EvalResult test = evaluate(bundle, layout, ctx.test, cf, seed, "test", &out.comm);
  out.test_metrics.accuracy = test.acc;
  out.test_metrics.logloss = test.logloss;
  out.test_metrics.scg = test.scg;
  out.test_metrics.fr = test.fr;
  out.test_metrics.dp_diff = test.dp_diff;
  out.test_metrics.eo_gap = test.eo_gap;
  out.test_metrics.seed = seed;
  out.test_repr = test.z;
  out.test_pred = argmax_rows(test.logits);
  if (cf.active()) out.mask = cf.mask;
  out.releases = ledger.records();

  // Per-party validity summaries of the final model, aggregated through the
  // secure-aggregation path so the server only sees the sums.
  if (method.use_gen && !bundle.generators.empty()) {
    std::vector<std::vector<double>> vecs;
    const std::vector<int> targets = draw_targets(train_ds.s, num_groups, &target_rng);
    const Matrix z_all = fuse_forward(bundle, train_ds.x, layout, false, nullptr);
    const Matrix z_cur = cf.sketch->embed_rows(train_ds.s);
    const Matrix z_tgt = cf.sketch->embed_rows(targets);
    for (int p = 0; p < m; ++p) {
      const Matrix slice = train_ds.x.take_cols(slices.cols[static_cast<std::size_t>(p)]);
      const Matrix gen = cfgen::generate_cf(slice, bundle.generators[static_cast<std::size_t>(p)],
                                            cf.mask.version, z_cur, z_tgt, z_all, nullptr);
      std::vector<int> med_local;
      for (std::size_t k = 0; k < slices.cols[static_cast<std::size_t>(p)].size(); ++k) {
        const int global = slices.cols[static_cast<std::size_t>(p)][k];
        const auto& mcols = cf.mask.parties[static_cast<std::size_t>(p)].m;
        if (std::find(mcols.begin(), mcols.end(), global) != mcols.end())
          med_local.push_back(static_cast<int>(k));
      }
      const Matrix ref = med_local.empty() ? Matrix()
                                           : train_ds.x.take_cols(
                                                 cf.mask.parties[static_cast<std::size_t>(p)].m);
      const auto v = cfgen::validity_summaries(
          slice, gen, bundle.generators[static_cast<std::size_t>(p)].coords,
          bundle.party_advs[static_cast<std::size_t>(p)], ref, train_ds.s, num_groups);
      vecs.push_back({v.v_id, v.v_supp, v.v_leak});
    }
    if (m >= 2) {
      auto agg = dp::secagg_round(vecs, secagg_rng);
      out.comm.charge_aux(static_cast<std::uint64_t>(m) * 3);
      out.notes.push_back("validity(sum over parties): id=" + std::to_string(agg.combined[0]) +
                          " supp=" + std::to_string(agg.combined[1]) +
                          " leak=" + std::to_string(agg.combined[2]));
    }
  }
  out.model = bundle;
  return out;
}

// Canonical evaluation probe for methods that train without a counterfactual
// pipeline of their own (mask mode none): a deterministic masked edit on the
// standard discovered mediator set, realized as a group-conditional mean
// shift.  The probe charges its own evaluation-side ledger.
inline CfPipeline make_eval_probe(const data::Dataset& train_ds, const data::VerticalLayout& layout,
                                  const DpConfig& dp_cfg, double cf_scale, std::uint64_t seed) {
  CfPipeline probe;
  probe.mode = MaskMode::kMediators;
  probe.cf_scale = cf_scale;
  const int tables = train_ds.cols() * (train_ds.num_groups > 2 ? train_ds.num_groups : 1);
  dp::BudgetLedger ledger(tables);
  RngStream rng = RngStream::substream(seed, "dp/eval_probe");
  DpConfig cfg = dp_cfg;
  cfg.permutations = 0;  // ranking only; no FDR step at evaluation
  DiscoveryResult disco = run_discovery(train_ds, layout, cfg, ledger, rng, nullptr, nullptr);
  probe.mask = disco.mask;
  for (auto& pm : probe.mask.parties) pm.p.clear();  // the probe edits every mediator
  probe.group_mediator_means =
      train_detail::group_column_means(train_ds.x, train_ds.s, train_ds.num_groups);
  return probe;
}

}  // namespace sccvfl::engine

#endif  // SCCVFL_TRAIN_HPP_
