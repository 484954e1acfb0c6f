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

#ifndef SCCVFL_ENGINE_HPP_
#define SCCVFL_ENGINE_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sccvfl/dataset.hpp"
#include "sccvfl/error.hpp"
#include "sccvfl/generator.hpp"
#include "sccvfl/mask.hpp"
#include "sccvfl/matrix.hpp"
#include "sccvfl/metrics.hpp"
#include "sccvfl/nn.hpp"
#include "sccvfl/optim.hpp"
#include "sccvfl/privacy.hpp"
#include "sccvfl/rng.hpp"

namespace sccvfl::engine {

// ---------------------------------------------------------------------------
// Method matrix

enum class MaskMode { kNone, kAll, kMediators, kRandomShuffle, kMediatorsPerClient };

struct MethodConfig {
  std::string name;
  bool use_cls = true;
  bool use_cons = false;
  bool use_gen = false;
  bool use_adv = false;  // representation-level adversary on the fused h
  MaskMode mask_mode = MaskMode::kNone;
  bool proxy_partition = true;  // false treats every mediator as editable
};

inline MethodConfig method_matrix(const std::string& name) {
  MethodConfig c;
  c.name = name;
  if (name == "adv_nomask") {
    c.use_adv = true;
    c.mask_mode = MaskMode::kNone;
  } else if (name == "uniform_cf") {
    c.use_cons = true;
    c.use_gen = true;
    c.mask_mode = MaskMode::kAll;
    c.proxy_partition = false;
  } else if (name == "policy_blind") {
    c.use_cons = true;
    c.use_gen = true;
    c.mask_mode = MaskMode::kMediators;
    c.proxy_partition = false;
  } else if (name == "server_consistency") {
    c.use_cons = true;
    c.mask_mode = MaskMode::kRandomShuffle;
  } else if (name == "scc_vfl") {
    c.use_cons = true;
    c.use_gen = true;
    c.use_adv = true;
    c.mask_mode = MaskMode::kMediatorsPerClient;
  } else if (name == "scc_wo_mask") {
    c = method_matrix("scc_vfl");
    c.name = name;
    c.mask_mode = MaskMode::kAll;  // every feature becomes a mediator
    c.proxy_partition = false;
  } else if (name == "scc_wo_generator") {
    c = method_matrix("scc_vfl");
    c.name = name;
    c.use_gen = false;
    c.mask_mode = MaskMode::kRandomShuffle;  // server shuffles mediator coordinates
  } else if (name == "scc_wo_consistency") {
    c = method_matrix("scc_vfl");
    c.name = name;
    c.use_cons = false;
  } else {
    throw Error(Error::Kind::kConfig, "unknown method: " + name);
  }
  return c;
}

inline std::vector<std::string> known_methods() {
  return {"adv_nomask", "uniform_cf", "policy_blind", "server_consistency", "scc_vfl",
          "scc_wo_mask", "scc_wo_generator", "scc_wo_consistency"};
}

// ---------------------------------------------------------------------------
// Configuration

struct LossWeights {
  double lam_cons_max = 1.2;
  double lam_gen = 0.01;
  double lam_adv = 0.03;
  double alpha_v = 1.0;  // validity weights in the reported joint objective
  double beta_v = 1.0;
  double eta_v = 0.03;
  int warmup_epochs = 40;  // no consistency term before this epoch
  int ramp_epochs = 20;    // linear ramp of lam_cons after warmup
  int norm_p = 1;          // 1 for classification logits, 2 for regression
  cfgen::GenLossWeights gen_weights;

  double lam_cons(int epoch) const {
    if (epoch < warmup_epochs) return 0.0;
    if (ramp_epochs <= 0) return lam_cons_max;
    const double t = static_cast<double>(epoch - warmup_epochs + 1) / ramp_epochs;
    return lam_cons_max * std::min(1.0, t);
  }
};

struct TrainHyper {
  int hidden = 64;
  double dropout = 0.05;
  OptVariant backbone_opt = OptVariant::kAdamW;
  double lr_backbone = 0.015;
  double weight_decay = 5e-4;
  double lr_generator = 0.010;
  double lr_adversary = 0.005;
  int batch = 0;  // 0 = full batch
  int max_epochs = 300;
  int patience = 35;
  int latent_dim = 8;
  double cf_scale = 0.20;
  bool per_party_encoders = false;  // alternate fuse mode
  int gen_refresh_epochs = 15;      // generator rebinding after a mask change
};

// Per-dataset presets; all overridable through the manifest.
inline TrainHyper dataset_hyper(const std::string& dataset) {
  TrainHyper h;
  if (dataset == "heart") {
    h.hidden = 32;
    h.dropout = 0.10;
    h.backbone_opt = OptVariant::kAdam;
    h.lr_backbone = 0.010;
    h.latent_dim = 16;
    h.max_epochs = 200;
    h.patience = 25;
    h.cf_scale = 0.25;
  } else if (dataset == "compas") {
    h.hidden = 32;
    h.dropout = 0.10;
    h.backbone_opt = OptVariant::kAdam;
    h.lr_backbone = 0.005;
    h.latent_dim = 8;
    h.max_epochs = 150;
    h.patience = 25;
    h.lr_generator = 0.005;
    h.lr_adversary = 0.003;
  }
  return h;
}

inline LossWeights dataset_weights(const std::string& dataset) {
  LossWeights w;
  if (dataset == "heart") w.warmup_epochs = 30;
  if (dataset == "compas") w.warmup_epochs = 25;
  return w;
}

struct DpConfig {
  double sigma = 1.0;
  double delta = 1e-5;
  double clip = 0.0;  // 0 selects the 90th-percentile auto bound
  int bins = 10;
  dp::BinStrategy strategy = dp::BinStrategy::kEqualWidth;
  int sketch_dim = 2;
  int max_refreshes = 3;
  int refresh_interval = 50;
  double rho_m = 0.60;
  double rho_p = 0.50;
  double hysteresis_margin = 0.05;
  double fdr_q = 0.10;
  int permutations = 120;  // permutation null size for the HSIC p-values
};

// ---------------------------------------------------------------------------
// Communication accounting

// Feature-side: party-to-server activation uploads (original and
// counterfactual passes), 4-byte values.  Model-side: the shared-model
// update broadcast once per optimizer step.  Context vectors, sketches, and
// masked shares ride the auxiliary counter and stay out of the two headline
// numbers.
struct CommCounters {
  std::uint64_t feature_bytes = 0;
  std::uint64_t model_bytes = 0;
  std::uint64_t aux_bytes = 0;

  void charge_activation_pass(int parties, int rows, int width) {
    feature_bytes += 4ull * static_cast<std::uint64_t>(parties) *
                     static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(width);
  }
  void charge_model_step(std::size_t param_count) {
    model_bytes += 4ull * static_cast<std::uint64_t>(param_count);
  }
  void charge_aux(std::uint64_t values) { aux_bytes += 4ull * values; }
};

// ---------------------------------------------------------------------------
// Model bundle and fuse

struct CalibrationState {
  double temperature = 1.0;
  bool degenerate = false;
};

struct ModelBundle {
  bool per_party = false;
  Mlp backbone;                     // shared 2-layer MLP over the concatenation
  std::vector<Mlp> party_encoders;  // alternate per-party mode
  Mlp head;                         // linear classifier on the fused representation
  std::vector<cfgen::GeneratorParams> generators;
  std::vector<cfgen::AdversaryParams> party_advs;
  Mlp rep_adversary;
  bool has_rep_adversary = false;
  CalibrationState calibration;
  int num_classes = 2;
  int num_groups = 2;

  int repr_width() const {
    if (!per_party) return backbone.output_dim();
    int w = 0;
    for (const auto& e : party_encoders) w += e.output_dim();
    return w;
  }

  std::size_t shared_param_count() const {
    std::size_t n = head.param_count();
    if (per_party) {
      for (const auto& e : party_encoders) n += e.param_count();
    } else {
      n += backbone.param_count();
    }
    return n;
  }
};

struct FuseCache {
  MlpCache backbone_cache;
  std::vector<MlpCache> party_caches;
};

// Fuses party inputs into the representation z.  In the default mode the
// parties expose feature slices and one shared MLP reads the concatenation
// at fixed index ranges; the alternate mode runs per-party encoders and
// concatenates their outputs.  Party order is the layout order, so arrival
// order cannot change the result.
inline Matrix fuse_forward(const ModelBundle& bundle, const Matrix& x,
                           const data::VerticalLayout& layout, bool train_mode, RngStream* rng,
                           FuseCache* cache = nullptr) {
  if (!bundle.per_party)
    return mlp_forward(bundle.backbone, x, train_mode, rng, cache ? &cache->backbone_cache : nullptr);
  check(static_cast<int>(bundle.party_encoders.size()) == layout.parties(), Error::Kind::kShape,
        "missing party encoder; round aborted");
  std::vector<Matrix> outs;
  if (cache) cache->party_caches.resize(bundle.party_encoders.size());
  for (std::size_t p = 0; p < bundle.party_encoders.size(); ++p)
    outs.push_back(mlp_forward(bundle.party_encoders[p], x.take_cols(layout.party_cols[p]),
                               train_mode, rng, cache ? &cache->party_caches[p] : nullptr));
  return hconcat(outs);
}

inline Matrix fuse_forward_reuse(const ModelBundle& bundle, const Matrix& x,
                                 const data::VerticalLayout& layout, const FuseCache& donor,
                                 FuseCache* cache = nullptr) {
  if (!bundle.per_party)
    return mlp_forward_reuse(bundle.backbone, x, donor.backbone_cache,
                             cache ? &cache->backbone_cache : nullptr);
  std::vector<Matrix> outs;
  if (cache) cache->party_caches.resize(bundle.party_encoders.size());
  for (std::size_t p = 0; p < bundle.party_encoders.size(); ++p)
    outs.push_back(mlp_forward_reuse(bundle.party_encoders[p], x.take_cols(layout.party_cols[p]),
                                     donor.party_caches[p], cache ? &cache->party_caches[p] : nullptr));
  return hconcat(outs);
}

struct FuseGrads {
  MlpGrads backbone;
  std::vector<MlpGrads> parties;
  Matrix dx;  // gradient w.r.t. the assembled input (layout order)
};

inline FuseGrads fuse_backward(const ModelBundle& bundle, const data::VerticalLayout& layout,
                               const FuseCache& cache, const Matrix& dz) {
  FuseGrads g;
  if (!bundle.per_party) {
    g.backbone = mlp_backward(bundle.backbone, cache.backbone_cache, dz);
    g.dx = g.backbone.dx;
    return g;
  }
  g.dx = Matrix(dz.rows(), 0);
  int at = 0;
  Matrix dx_full;
  for (std::size_t p = 0; p < bundle.party_encoders.size(); ++p) {
    const int w = bundle.party_encoders[p].output_dim();
    Matrix dz_p(dz.rows(), w);
    for (int i = 0; i < dz.rows(); ++i)
      for (int j = 0; j < w; ++j) dz_p(i, j) = dz(i, at + j);
    at += w;
    g.parties.push_back(mlp_backward(bundle.party_encoders[p], cache.party_caches[p], dz_p));
    if (dx_full.empty()) {
      int total = 0;
      for (const auto& cols : layout.party_cols) total += static_cast<int>(cols.size());
      dx_full = Matrix(dz.rows(), total);
    }
    dx_full.put_cols(layout.party_cols[p], g.parties.back().dx);
  }
  g.dx = dx_full;
  return g;
}

// ---------------------------------------------------------------------------
// SCC loss

struct SccLoss {
  double value = 0.0;
  Matrix dlogits;
  Matrix dlogits_cf;
};

// Mean ||f(z) - f(z_cf)||_p over the batch on logits; the subgradient at
// exact ties is 0.
inline SccLoss scc_loss(const Matrix& logits, const Matrix& logits_cf, int p = 1) {
  check(logits.same_shape(logits_cf), Error::Kind::kShape, "scc_loss shape mismatch");
  check(p == 1 || p == 2, Error::Kind::kDomain, "consistency norm order must be 1 or 2");
  SccLoss out;
  out.dlogits = Matrix(logits.rows(), logits.cols());
  out.dlogits_cf = Matrix(logits.rows(), logits.cols());
  const double inv_n = 1.0 / logits.rows();
  for (int i = 0; i < logits.rows(); ++i) {
    if (p == 1) {
      for (int j = 0; j < logits.cols(); ++j) {
        const double d = logits(i, j) - logits_cf(i, j);
        out.value += std::fabs(d) * inv_n;
        const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        out.dlogits(i, j) = sgn * inv_n;
        out.dlogits_cf(i, j) = -sgn * inv_n;
      }
    } else {
      double norm = 0.0;
      for (int j = 0; j < logits.cols(); ++j) {
        const double d = logits(i, j) - logits_cf(i, j);
        norm += d * d;
      }
      norm = std::sqrt(norm);
      out.value += norm * inv_n;
      if (norm > 0.0) {
        for (int j = 0; j < logits.cols(); ++j) {
          const double d = logits(i, j) - logits_cf(i, j);
          out.dlogits(i, j) = d / norm * inv_n;
          out.dlogits_cf(i, j) = -d / norm * inv_n;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Joint objective

struct ObjectiveComponents {
  double task = 0.0, cons = 0.0, gen = 0.0, adv = 0.0;
  double v_id = 0.0, v_supp = 0.0, v_leak = 0.0;
  bool have_cons = false, have_gen = false, have_adv = false, have_validity = false;
};

// L = L_cls + lam_cons(epoch) * L_cons + lam_gen * L_gen + lam_adv * L_adv,
// with the validity group alpha' V_id + beta' V_supp - eta' V_leak added
// when joint_form is selected.  A term the method requires but the caller
// did not provide is a configuration error.
inline double total_objective(const ObjectiveComponents& c, const LossWeights& w, int epoch,
                              const MethodConfig& method, bool joint_form = false) {
  check(!method.use_cons || c.have_cons, Error::Kind::kConfig,
        "method requires the consistency term but none was provided");
  check(!method.use_gen || c.have_gen, Error::Kind::kConfig,
        "method requires the generator term but none was provided");
  check(!method.use_adv || c.have_adv, Error::Kind::kConfig,
        "method requires the adversary term but none was provided");
  double total = c.task;
  if (method.use_cons) total += w.lam_cons(epoch) * c.cons;
  if (method.use_gen) total += w.lam_gen * c.gen;
  if (method.use_adv) total += w.lam_adv * c.adv;
  if (joint_form && c.have_validity)
    total += w.alpha_v * c.v_id + w.beta_v * c.v_supp - w.eta_v * c.v_leak;
  return total;
}

// ---------------------------------------------------------------------------
// Layout assembly

// Training operates on a column ordering where each party's block is
// contiguous (fixed index ranges).  Masks, attacks, and exports all speak
// this assembled column space; names travel with the permutation.
struct AssembledData {
  data::Dataset train, val, test;
  data::VerticalLayout layout;
  std::vector<int> column_order;  // assembled position -> original column
};

inline AssembledData assemble_layout_order(const data::Splits& splits,
                                           const data::VerticalLayout& layout) {
  layout.validate(splits.train.cols());
  AssembledData out;
  for (const auto& cols : layout.party_cols)
    out.column_order.insert(out.column_order.end(), cols.begin(), cols.end());
  auto permute = [&out](const data::Dataset& ds) {
    data::Dataset nd = ds;
    nd.x = ds.x.take_cols(out.column_order);
    nd.feature_names.clear();
    for (int c : out.column_order) nd.feature_names.push_back(ds.feature_names[static_cast<std::size_t>(c)]);
    return nd;
  };
  out.train = permute(splits.train);
  out.val = permute(splits.val);
  out.test = permute(splits.test);
  int at = 0;
  out.layout.party_names = layout.party_names;
  for (const auto& cols : layout.party_cols) {
    std::vector<int> contiguous;
    for (std::size_t k = 0; k < cols.size(); ++k) contiguous.push_back(at++);
    out.layout.party_cols.push_back(contiguous);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discovery

struct DiscoveryResult {
  discovery::ScoreSet scores;
  discovery::FeatureMask mask;
  std::vector<std::vector<double>> bin_edges;  // per assembled column
};

namespace detail {

inline int party_of_column(const data::VerticalLayout& layout, int col) {
  for (int p = 0; p < layout.parties(); ++p)
    for (int c : layout.party_cols[static_cast<std::size_t>(p)])
      if (c == col) return p;
  throw Error(Error::Kind::kLayout, "column outside layout");
}

inline std::vector<double> column_values(const Matrix& x, int col) {
  std::vector<double> v(static_cast<std::size_t>(x.rows()));
  for (int i = 0; i < x.rows(); ++i) v[static_cast<std::size_t>(i)] = x(i, col);
  return v;
}

}  // namespace detail

// Tri-partition discovery from DP-released contingency tables.  The trusted
// holder bins each feature, builds group-by-bin tables (one-vs-rest per
// group when s is multi-valued), clips, and releases them under the
// Gaussian mechanism; the server scores and partitions.
inline DiscoveryResult run_discovery(const data::Dataset& train, const data::VerticalLayout& layout,
                                     const DpConfig& dp_cfg, dp::BudgetLedger& ledger,
                                     RngStream& dp_rng, dp::AuditLog* audit, CommCounters* comm) {
  const int d = train.cols();
  DiscoveryResult out;
  out.bin_edges.resize(static_cast<std::size_t>(d));

  // Raw tables first: the clip bound is frozen from their norms before any
  // release.
  std::vector<std::vector<dp::ContingencyTable>> raw(static_cast<std::size_t>(d));
  std::vector<std::vector<int>> bins_per_col(static_cast<std::size_t>(d));
  const int one_vs_rest = train.num_groups > 2 ? train.num_groups : 1;
  std::vector<dp::ContingencyTable> all_raw;
  for (int j = 0; j < d; ++j) {
    dp::BinResult br = dp::bin_feature(detail::column_values(train.x, j), dp_cfg.bins, dp_cfg.strategy);
    out.bin_edges[static_cast<std::size_t>(j)] = br.edges;
    bins_per_col[static_cast<std::size_t>(j)] = br.bins;
    for (int g = 0; g < one_vs_rest; ++g) {
      std::vector<int> s01(train.s.size());
      for (std::size_t i = 0; i < train.s.size(); ++i)
        s01[i] = one_vs_rest == 1 ? train.s[i] : (train.s[i] == g ? 1 : 0);
      dp::ContingencyTable t = dp::build_contingency(bins_per_col[static_cast<std::size_t>(j)], s01,
                                                     dp_cfg.bins, j);
      raw[static_cast<std::size_t>(j)].push_back(t);
      all_raw.push_back(t);
    }
  }
  const double clip = dp_cfg.clip > 0.0 ? dp_cfg.clip : dp::default_clip_bound(all_raw);

  for (int j = 0; j < d; ++j) {
    discovery::FeatureScore sc;
    sc.feature = j;
    sc.party = detail::party_of_column(layout, j);
    double best_hsic = -1.0;
    int best_group = 0;
    bool any_available = false;
    for (int g = 0; g < one_vs_rest; ++g) {
      const dp::ContingencyTable clipped = dp::clip_table(raw[static_cast<std::size_t>(j)][static_cast<std::size_t>(g)], clip);
      auto release = dp::gaussian_release(clipped, dp_cfg.sigma, clip, dp_cfg.delta, dp_rng, ledger);
      if (audit) audit->append_release(release.record, /*mask_version=*/0);
      if (comm) comm->charge_aux(static_cast<std::uint64_t>(release.noisy.counts.size()));
      const discovery::TableScore ts = discovery::score_from_table(release.noisy);
      if (!ts.available) continue;
      any_available = true;
      if (ts.hsic > best_hsic) {
        best_hsic = ts.hsic;
        best_group = g;
        sc.delta = ts.delta;
        sc.hsic = ts.hsic;
      } else if (std::fabs(ts.delta) > std::fabs(sc.delta)) {
        sc.delta = ts.delta;
      }
    }
    sc.available = any_available;
    if (any_available && dp_cfg.permutations > 0) {
      std::vector<int> s01(train.s.size());
      for (std::size_t i = 0; i < train.s.size(); ++i)
        s01[i] = one_vs_rest == 1 ? train.s[i] : (train.s[i] == best_group ? 1 : 0);
      sc.p_value = discovery::hsic_permutation_pvalue(bins_per_col[static_cast<std::size_t>(j)], s01,
                                                      dp_cfg.bins, sc.hsic, dp_cfg.permutations, dp_rng);
    }
    out.scores.push_back(sc);
  }
  discovery::combine_scores(&out.scores);
  out.mask = discovery::tripartition(out.scores, dp_cfg.rho_m, dp_cfg.rho_p, layout);
  return out;
}

// Synthetic all-mediator mask for methods without discovery.
inline discovery::FeatureMask all_mediator_mask(const data::VerticalLayout& layout) {
  discovery::FeatureMask mask;
  mask.rho_m = 1.0;
  mask.rho_p = 1.0;
  for (const auto& cols : layout.party_cols) {
    discovery::PartyMask pm;
    pm.m = cols;
    mask.parties.push_back(pm);
  }
  return mask;
}

// ---------------------------------------------------------------------------
// History and output

struct HistoryRow {
  int epoch = 0;
  std::string phase;
  double train_loss = 0.0;
  double val_acc = 0.0, val_logloss = 0.0, val_scg = 0.0, val_fr = 0.0;
  double lam_cons = 0.0;
  int mask_version = 0;
  std::uint64_t feature_bytes = 0, model_bytes = 0;
};

struct TrainOutput {
  ModelBundle model;
  std::vector<HistoryRow> history;
  eval::MetricsRecord test_metrics;
  CommCounters comm;
  std::optional<discovery::FeatureMask> mask;
  std::vector<dp::DpReleaseRecord> releases;
  int best_epoch = -1;
  int epochs_run = 0;
  double best_composite = 0.0;
  Matrix test_repr;
  std::vector<int> test_pred;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Counterfactual machinery

// Counterfactual construction context shared by training and evaluation.
struct CfPipeline {
  MaskMode mode = MaskMode::kNone;
  discovery::FeatureMask mask;
  std::vector<cfgen::PartyCoords> coords;
  std::optional<dp::SketchEmbedding> sketch;
  Matrix group_mediator_means;  // num_groups x d, used by the deterministic probe
  double cf_scale = 0.20;

  bool active() const { return mode != MaskMode::kNone; }
};

inline std::vector<int> draw_targets(const std::vector<int>& s, int num_groups, RngStream* rng) {
  std::vector<int> t(s.size());
  if (num_groups == 2) {
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = 1 - s[i];  // deterministic flip
  } else {
    check(rng != nullptr, Error::Kind::kContract, "multi-group targets need an rng stream");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int step = 1 + static_cast<int>(rng->uniform_index(static_cast<std::uint64_t>(num_groups - 1)));
      t[i] = (s[i] + step) % num_groups;
    }
  }
  return t;
}

// Group-conditional mean shift on the mediator columns: the deterministic
// masked edit used when a method has no generator of its own.
inline Matrix mean_shift_cf(const Matrix& x, const std::vector<int>& s, const std::vector<int>& targets,
                            const CfPipeline& cf) {
  Matrix out = x;
  for (const auto& pm : cf.mask.parties)
    for (int c : pm.m)
      for (int i = 0; i < x.rows(); ++i)
        out(i, c) += cf.cf_scale * (cf.group_mediator_means(targets[static_cast<std::size_t>(i)], c) -
                                    cf.group_mediator_means(s[static_cast<std::size_t>(i)], c));
  return out;
}

// Builds the counterfactual inputs for one round under the pipeline's mask
// mode.  `gen_rng` enables posterior sampling (training); nullptr keeps the
// generators deterministic.  `shuffle_rng` drives the within-batch row
// permutation of mediator columns in the shuffle mode.
inline Matrix counterfactual_inputs(const Matrix& x, const std::vector<int>& s,
                                    const std::vector<int>& targets, const ModelBundle& bundle,
                                    const CfPipeline& cf, const Matrix& context,
                                    RngStream* gen_rng, RngStream* shuffle_rng) {
  switch (cf.mode) {
    case MaskMode::kNone:
      return x;
    case MaskMode::kRandomShuffle: {
      check(shuffle_rng != nullptr, Error::Kind::kContract, "shuffle mode needs an rng stream");
      std::vector<int> perm(static_cast<std::size_t>(x.rows()));
      for (int i = 0; i < x.rows(); ++i) perm[static_cast<std::size_t>(i)] = i;
      shuffle_rng->shuffle(perm.begin(), perm.end());
      Matrix out = x;
      for (const auto& pm : cf.mask.parties)
        for (int c : pm.m)
          for (int i = 0; i < x.rows(); ++i) out(i, c) = x(perm[static_cast<std::size_t>(i)], c);
      return out;
    }
    case MaskMode::kAll:
    case MaskMode::kMediators:
    case MaskMode::kMediatorsPerClient: {
      if (bundle.generators.empty()) return mean_shift_cf(x, s, targets, cf);
      check(cf.sketch.has_value(), Error::Kind::kContract, "generator pipeline needs a sketch");
      const Matrix z_cur = cf.sketch->embed_rows(s);
      const Matrix z_tgt = cf.sketch->embed_rows(targets);
      Matrix out = x;
      for (std::size_t p = 0; p < bundle.generators.size(); ++p) {
        const auto& cols = cf.mask.parties[p];
        std::vector<int> party_cols = cols.n;
        party_cols.insert(party_cols.end(), cols.m.begin(), cols.m.end());
        std::sort(party_cols.begin(), party_cols.end());
        const Matrix slice = x.take_cols(party_cols);
        const Matrix cf_slice = cfgen::generate_cf(slice, bundle.generators[p], cf.mask.version,
                                                   z_cur, z_tgt, context, gen_rng);
        out.put_cols(party_cols, cf_slice);
      }
      return out;
    }
  }
  throw Error(Error::Kind::kConfig, "unhandled mask mode");
}

struct RoundResult {
  Matrix z, z_cf;
  Matrix logits, logits_cf;
  FuseCache fuse_cache, fuse_cache_cf;
  MlpCache head_cache, head_cache_cf;
  Matrix x_cf;
};

// Computes both fused representations of a batch from the same parameters.
// The counterfactual pass reuses the original pass's dropout masks, so a
// zero-scale pipeline reproduces z exactly even in train mode, and the pass
// itself never touches parameters or optimizer state.
inline RoundResult counterfactual_round(const ModelBundle& bundle, const data::VerticalLayout& layout,
                                        const Matrix& x, const std::vector<int>& s,
                                        const std::vector<int>& targets, const CfPipeline& cf,
                                        bool train_mode, RngStream* dropout_rng, RngStream* gen_rng,
                                        RngStream* shuffle_rng, CommCounters* comm) {
  RoundResult r;
  r.z = fuse_forward(bundle, x, layout, train_mode, dropout_rng, &r.fuse_cache);
  if (comm) comm->charge_activation_pass(layout.parties(), x.rows(), bundle.repr_width());
  r.logits = mlp_forward(bundle.head, r.z, false, nullptr, &r.head_cache);
  if (!cf.active()) {
    r.z_cf = r.z;
    r.logits_cf = r.logits;
    return r;
  }
  const Matrix context = r.z;  // server-provided cross-party summary, detached
  if (comm) comm->charge_aux(static_cast<std::uint64_t>(context.size()) * layout.parties());
  r.x_cf = counterfactual_inputs(x, s, targets, bundle, cf, context, gen_rng, shuffle_rng);
  r.z_cf = train_mode ? fuse_forward_reuse(bundle, r.x_cf, layout, r.fuse_cache, &r.fuse_cache_cf)
                      : fuse_forward(bundle, r.x_cf, layout, false, nullptr, &r.fuse_cache_cf);
  if (comm) comm->charge_activation_pass(layout.parties(), x.rows(), bundle.repr_width());
  r.logits_cf = mlp_forward(bundle.head, r.z_cf, false, nullptr, &r.head_cache_cf);
  return r;
}

// ---------------------------------------------------------------------------
// Calibration

// One-dimensional search for the temperature minimizing validation NLL of
// softmax(logits / T); argmax (and so accuracy, FR) is invariant.
inline CalibrationState calibrate(const Matrix& val_logits, const std::vector<int>& y) {
  CalibrationState cal;
  bool single_class = true;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] != y[0]) single_class = false;
  if (single_class) {
    cal.degenerate = true;
    return cal;
  }
  auto nll = [&](double t) {
    Matrix scaled = val_logits;
    scaled *= 1.0 / t;
    return eval::utility_metrics(scaled, y).logloss;
  };
  double best_t = 1.0, best = nll(1.0);
  for (double lt = std::log(0.05); lt <= std::log(20.0) + 1e-9; lt += 0.05) {
    const double t = std::exp(lt);
    const double v = nll(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  double lo = best_t * std::exp(-0.05), hi = best_t * std::exp(0.05);
  for (int it = 0; it < 40; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (nll(m1) < nll(m2))
      hi = m2;
    else
      lo = m1;
  }
  cal.temperature = 0.5 * (lo + hi);
  return cal;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  double acc = 0.0, logloss = 0.0, scg = 0.0, fr = 0.0, dp_diff = 0.0, eo_gap = 0.0;
  Matrix logits, logits_cf;
  Matrix z;
};

// Deterministic evaluation: posterior-mean generators, seeded shuffle and
// target draws, dropout off.  SCG and FR are measured on raw
// (pre-calibration) logits; the log loss uses the calibrated temperature.
inline EvalResult evaluate(const ModelBundle& bundle, const data::VerticalLayout& layout,
                           const data::Dataset& ds, const CfPipeline& cf, std::uint64_t seed,
                           const std::string& tag, CommCounters* comm) {
  EvalResult out;
  RngStream shuffle_rng = RngStream::substream(seed, "eval/shuffle/" + tag);
  RngStream target_rng = RngStream::substream(seed, "eval/target/" + tag);
  const std::vector<int> targets =
      cf.active() ? draw_targets(ds.s, bundle.num_groups, &target_rng) : ds.s;
  RoundResult r = counterfactual_round(bundle, layout, ds.x, ds.s, targets, cf, false, nullptr,
                                       nullptr, &shuffle_rng, comm);
  out.z = r.z;
  out.logits = r.logits;
  out.logits_cf = r.logits_cf;
  Matrix scaled = r.logits;
  if (bundle.calibration.temperature != 1.0) scaled *= 1.0 / bundle.calibration.temperature;
  const auto util = eval::utility_metrics(scaled, ds.y);
  out.acc = util.accuracy;
  out.logloss = util.logloss;
  out.scg = eval::scg(r.logits, r.logits_cf);
  out.fr = eval::flip_rate(argmax_rows(r.logits), argmax_rows(r.logits_cf));
  if (bundle.num_groups >= 2) {
    const auto gf = eval::group_fairness(argmax_rows(r.logits), ds.y, ds.s);
    out.dp_diff = gf.dp_diff;
    out.eo_gap = gf.eo_gap;
  }
  return out;
}

// Input gradient of the (calibrated-free) task loss w.r.t. the assembled
// features; consumed by the subspace-PGD harness.
inline Matrix model_input_gradient(const ModelBundle& bundle, const data::VerticalLayout& layout,
                                   const Matrix& x, const std::vector<int>& labels) {
  FuseCache fc;
  const Matrix z = fuse_forward(bundle, x, layout, false, nullptr, &fc);
  MlpCache hc;
  const Matrix logits = mlp_forward(bundle.head, z, false, nullptr, &hc);
  const auto xent = softmax_xent(logits, labels);
  const MlpGrads head_g = mlp_backward(bundle.head, hc, xent.dlogits);
  const FuseGrads fg = fuse_backward(bundle, layout, fc, head_g.dx);
  return fg.dx;
}

}  // namespace sccvfl::engine

#endif  // SCCVFL_ENGINE_HPP_
