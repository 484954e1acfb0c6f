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

#ifndef SCCVFL_GENERATOR_HPP_
#define SCCVFL_GENERATOR_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/kernels.hpp"
#include "sccvfl/mask.hpp"
#include "sccvfl/matrix.hpp"
#include "sccvfl/nn.hpp"
#include "sccvfl/optim.hpp"
#include "sccvfl/rng.hpp"

namespace sccvfl::cfgen {

// Local-index bookkeeping for one party's column slice: the mask speaks in
// global encoded columns, the generator in positions within the slice.
struct PartyCoords {
  std::vector<int> n, m, p;        // local indices into the party slice
  std::vector<int> editable;      // m minus p, local indices
  std::vector<int> editable_in_m;  // positions of editable coords within m
  std::vector<int> proxy_in_m;     // positions of proxy coords within m

  static PartyCoords from_mask(const std::vector<int>& party_cols,
                               const discovery::PartyMask& pm) {
    PartyCoords c;
    auto local_of = [&party_cols](int global) {
      auto it = std::find(party_cols.begin(), party_cols.end(), global);
      check(it != party_cols.end(), Error::Kind::kContract, "mask column outside party slice");
      return static_cast<int>(it - party_cols.begin());
    };
    for (int g : pm.n) c.n.push_back(local_of(g));
    for (int g : pm.m) c.m.push_back(local_of(g));
    for (int g : pm.p) c.p.push_back(local_of(g));
    for (std::size_t k = 0; k < c.m.size(); ++k) {
      const bool is_proxy = std::find(c.p.begin(), c.p.end(), c.m[k]) != c.p.end();
      if (is_proxy) {
        c.proxy_in_m.push_back(static_cast<int>(k));
      } else {
        c.editable.push_back(c.m[k]);
        c.editable_in_m.push_back(static_cast<int>(k));
      }
    }
    return c;
  }
};

// Conditional VAE over the mediator block: the encoder reads
// [x_N, x_M, z_s] into a latent mean/log-variance, the decoder reads
// [latent, x_N, context, z_target] and emits all |M| mediator values.  Edits
// are blended as x + cf_scale * (decoded - x) on the editable mediators
// only; non-descendants and proxies pass through bit-identically.
struct GeneratorParams {
  Mlp encoder;  // -> 2 * latent_dim (mean then log-variance)
  Mlp decoder;  // -> |M|
  PartyCoords coords;
  double cf_scale = 0.20;
  int latent_dim = 8;
  int mask_version = 0;
};

struct AdversaryParams {
  Mlp net;  // [x_P^cf, x_N^cf] -> group logits
  double grl_lambda = 1.0;
};

struct GeneratorDims {
  int latent_dim = 8;
  int hidden = 32;
  int sketch_dim = 2;
  int context_dim = 0;
};

inline GeneratorParams make_generator(const PartyCoords& coords, const GeneratorDims& dims,
                                      double cf_scale, int mask_version, RngStream& rng) {
  GeneratorParams g;
  g.coords = coords;
  g.cf_scale = cf_scale;
  g.latent_dim = dims.latent_dim;
  g.mask_version = mask_version;
  const int enc_in = static_cast<int>(coords.n.size() + coords.m.size()) + dims.sketch_dim;
  const int dec_in = dims.latent_dim + static_cast<int>(coords.n.size()) + dims.context_dim +
                     dims.sketch_dim;
  const int m_width = std::max(1, static_cast<int>(coords.m.size()));
  g.encoder = make_mlp({enc_in, dims.hidden, 2 * dims.latent_dim}, Act::kRelu, Act::kLinear, 0.0, rng);
  g.decoder = make_mlp({dec_in, dims.hidden, m_width}, Act::kRelu, Act::kLinear, 0.0, rng);
  return g;
}

inline AdversaryParams make_adversary(const PartyCoords& coords, int hidden, int num_groups,
                                      double grl_lambda, RngStream& rng) {
  AdversaryParams a;
  const int in = std::max(1, static_cast<int>(coords.p.size() + coords.n.size()));
  a.net = make_mlp({in, hidden, num_groups}, Act::kRelu, Act::kLinear, 0.0, rng);
  a.grl_lambda = grl_lambda;
  return a;
}

namespace detail {

inline Matrix cols(const Matrix& x, const std::vector<int>& idx) { return x.take_cols(idx); }

struct EncodeOut {
  Matrix mu, logvar, latent;
  MlpCache cache;
};

inline EncodeOut encode(const GeneratorParams& g, const Matrix& x_party, const Matrix& z_current,
                        const Matrix* eps) {
  EncodeOut out;
  const Matrix enc_in = hconcat({cols(x_party, g.coords.n), cols(x_party, g.coords.m), z_current});
  const Matrix raw = mlp_forward(g.encoder, enc_in, false, nullptr, &out.cache);
  const int b = x_party.rows(), latent = g.latent_dim;
  out.mu = Matrix(b, latent);
  out.logvar = Matrix(b, latent);
  for (int i = 0; i < b; ++i)
    for (int l = 0; l < latent; ++l) {
      out.mu(i, l) = raw(i, l);
      out.logvar(i, l) = raw(i, latent + l);
    }
  out.latent = out.mu;
  if (eps) {
    check(eps->rows() == b && eps->cols() == latent, Error::Kind::kShape, "latent noise shape mismatch");
    for (int i = 0; i < b; ++i)
      for (int l = 0; l < latent; ++l)
        out.latent(i, l) += std::exp(0.5 * out.logvar(i, l)) * (*eps)(i, l);
  }
  return out;
}

inline Matrix decode_input(const GeneratorParams& g, const Matrix& latent, const Matrix& x_party,
                           const Matrix& context, const Matrix& z_target) {
  std::vector<Matrix> parts{latent, cols(x_party, g.coords.n)};
  if (context.cols() > 0) parts.push_back(context);
  parts.push_back(z_target);
  return hconcat(parts);
}

}  // namespace detail

// Counterfactual for one party slice.  `rng` selects posterior sampling for
// training-time draws; passing nullptr uses the posterior mean, making
// evaluation deterministic.
inline Matrix generate_cf(const Matrix& x_party, const GeneratorParams& g, int mask_version,
                          const Matrix& z_current, const Matrix& z_target, const Matrix& context,
                          RngStream* rng = nullptr) {
  check(mask_version == g.mask_version, Error::Kind::kContract,
        "mask version " + std::to_string(mask_version) + " does not match generator version " +
            std::to_string(g.mask_version));
  Matrix out = x_party;
  if (g.coords.editable.empty() || g.cf_scale == 0.0) return out;
  std::optional<Matrix> eps;
  if (rng) {
    eps = Matrix(x_party.rows(), g.latent_dim);
    for (int i = 0; i < eps->rows(); ++i)
      for (int l = 0; l < eps->cols(); ++l) (*eps)(i, l) = rng->normal();
  }
  const auto enc = detail::encode(g, x_party, z_current, eps ? &*eps : nullptr);
  const Matrix decoded =
      mlp_forward(g.decoder, detail::decode_input(g, enc.latent, x_party, context, z_target), false,
                  nullptr);
  for (std::size_t k = 0; k < g.coords.editable.size(); ++k) {
    const int col = g.coords.editable[k];
    const int pos = g.coords.editable_in_m[k];
    for (int i = 0; i < out.rows(); ++i)
      out(i, col) = x_party(i, col) + g.cf_scale * (decoded(i, pos) - x_party(i, col));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

struct GenLossWeights {
  double identity = 1.0;    // alpha
  double likelihood = 1.0;  // beta, scales reconstruction NLL + KL
  double support = 1.0;     // weight on MMD^2
  double leakage = 1.0;     // eta
};

struct GenLossComponents {
  double identity = 0.0;    // alpha * ||x_N^cf - x_N||^2 (structurally zero here)
  double likelihood = 0.0;  // beta * (gaussian reconstruction NLL + KL)
  double support = 0.0;     // support_weight * biased MMD^2 against the reference
  double leakage = 0.0;     // -eta * E[log(1 - p_true)] under the proxy adversary
  double total = 0.0;
  bool empty_mediators = false;
};

struct GenLossResult {
  GenLossComponents comps;
  MlpGrads d_encoder, d_decoder, d_adversary;
  Matrix serving_cf;        // pass-through proxies; what the VFL round consumes
  Matrix adversarial_view;  // [proxy-edited, x_N] columns seen by the adversary
};

// Joint loss of Eq.-style identity / likelihood / support / leakage terms
// with one backward pass.  The leakage value is reported as
// -eta E[log(1 - p_true)]; its gradients are realized through the gradient
// reversal layer, so the adversary descends its cross-entropy while the
// generator ascends it (lambda_grl scaling).  `eps` pins the
// reparameterization noise; `mmd_sigma` pins the kernel bandwidth.
inline GenLossResult gen_loss(const Matrix& x_party, const GeneratorParams& g,
                              const AdversaryParams& adv, const Matrix& z_current,
                              const Matrix& z_target, const Matrix& context,
                              const Matrix& reference_mediators, const std::vector<int>& s,
                              const GenLossWeights& w, double mmd_sigma, const Matrix& eps) {
  check(w.identity >= 0 && w.likelihood >= 0 && w.support >= 0 && w.leakage >= 0,
        Error::Kind::kDomain, "generator loss weights must be nonnegative");
  const int b = x_party.rows();
  GenLossResult out;
  out.d_encoder = zero_grads(g.encoder);
  out.d_decoder = zero_grads(g.decoder);
  out.d_adversary = zero_grads(adv.net);
  out.serving_cf = x_party;

  if (g.coords.m.empty()) {
    out.comps.empty_mediators = true;
    return out;
  }

  const Matrix x_m = detail::cols(x_party, g.coords.m);
  const auto enc = detail::encode(g, x_party, z_current, &eps);

  // Reconstruction pass conditioned on the current sketch.
  MlpCache rec_cache;
  const Matrix rec_in = detail::decode_input(g, enc.latent, x_party, context, z_current);
  const Matrix recon = mlp_forward(g.decoder, rec_in, false, nullptr, &rec_cache);

  // Counterfactual pass conditioned on the target sketch; shares the latent.
  MlpCache cf_cache;
  const Matrix cf_in = detail::decode_input(g, enc.latent, x_party, context, z_target);
  const Matrix decoded = mlp_forward(g.decoder, cf_in, false, nullptr, &cf_cache);

  const int m_width = static_cast<int>(g.coords.m.size());
  Matrix cf_m = x_m;  // full mediator block with blended editable coordinates
  for (std::size_t k = 0; k < g.coords.editable_in_m.size(); ++k) {
    const int pos = g.coords.editable_in_m[k];
    for (int i = 0; i < b; ++i)
      cf_m(i, pos) = x_m(i, pos) + g.cf_scale * (decoded(i, pos) - x_m(i, pos));
  }
  for (std::size_t k = 0; k < g.coords.editable.size(); ++k) {
    const int col = g.coords.editable[k];
    const int pos = g.coords.editable_in_m[k];
    for (int i = 0; i < b; ++i) out.serving_cf(i, col) = cf_m(i, pos);
  }

  // Gaussian reconstruction NLL (unit variance) + KL to the standard normal.
  double nll = 0.0;
  Matrix d_recon(b, m_width);
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < m_width; ++j) {
      const double r = recon(i, j) - x_m(i, j);
      nll += 0.5 * (r * r + kLog2Pi);
      d_recon(i, j) = w.likelihood * r / b;
    }
  nll /= b;
  double kl = 0.0;
  Matrix d_mu(b, g.latent_dim), d_logvar(b, g.latent_dim);
  for (int i = 0; i < b; ++i)
    for (int l = 0; l < g.latent_dim; ++l) {
      const double mu = enc.mu(i, l), lv = enc.logvar(i, l);
      kl += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
      d_mu(i, l) = w.likelihood * mu / b;
      d_logvar(i, l) = w.likelihood * (-0.5) * (1.0 - std::exp(lv)) / b;
    }
  kl /= b;
  out.comps.likelihood = w.likelihood * (nll + kl);

  // Support: biased MMD^2 of the blended mediator block against real
  // mediator rows drawn for the target groups.
  Matrix d_decoded(b, m_width);
  if (reference_mediators.rows() >= 2 && b >= 2 && !g.coords.editable.empty()) {
    const auto mmd = mmd2_biased_grad_x(cf_m, reference_mediators, mmd_sigma);
    out.comps.support = w.support * mmd.value;
    for (std::size_t k = 0; k < g.coords.editable_in_m.size(); ++k) {
      const int pos = g.coords.editable_in_m[k];
      for (int i = 0; i < b; ++i)
        d_decoded(i, pos) += w.support * g.cf_scale * mmd.dx(i, pos);
    }
  }

  // Leakage: the adversary reads the decoder's proxy head together with the
  // fixed non-descendants.  The serving path passes proxies through
  // unchanged; guarding the decoded values keeps the generator's outputs
  // free of recoverable group signal.
  const Matrix x_n = detail::cols(x_party, g.coords.n);
  Matrix proxy_view(b, static_cast<int>(g.coords.p.size()));
  for (std::size_t q = 0; q < g.coords.proxy_in_m.size(); ++q) {
    const int pos = g.coords.proxy_in_m[q];
    for (int i = 0; i < b; ++i) proxy_view(i, static_cast<int>(q)) = decoded(i, pos);
  }
  out.adversarial_view = proxy_view.cols() > 0 ? hconcat({proxy_view, x_n}) : x_n;
  if (out.adversarial_view.cols() == adv.net.input_dim() && out.adversarial_view.cols() > 0) {
    MlpCache adv_cache;
    const Matrix logits = mlp_forward(adv.net, out.adversarial_view, false, nullptr, &adv_cache);
    const auto xent = softmax_xent(logits, s);
    double leak = 0.0;
    for (int i = 0; i < b; ++i) {
      const double p_true = std::min(xent.probs(i, s[static_cast<std::size_t>(i)]), 1.0 - 1e-12);
      leak -= std::log(1.0 - p_true);
    }
    out.comps.leakage = w.leakage * leak / b;
    // The adversary always descends its own cross-entropy; eta scales only
    // the reversed gradient the generator receives.
    MlpGrads adv_grads = mlp_backward(adv.net, adv_cache, xent.dlogits);
    out.d_adversary.add(adv_grads);
    const Matrix d_inputs = grl_backward(adv_grads.dx, w.leakage * adv.grl_lambda);
    for (std::size_t q = 0; q < g.coords.proxy_in_m.size(); ++q) {
      const int pos = g.coords.proxy_in_m[q];
      for (int i = 0; i < b; ++i) d_decoded(i, pos) += d_inputs(i, static_cast<int>(q));
    }
  }

  // Backward: counterfactual decoder pass, reconstruction decoder pass,
  // then the encoder through the reparameterized latent.
  Matrix d_latent(b, g.latent_dim);
  {
    MlpGrads dec_cf = mlp_backward(g.decoder, cf_cache, d_decoded);
    out.d_decoder.add(dec_cf);
    for (int i = 0; i < b; ++i)
      for (int l = 0; l < g.latent_dim; ++l) d_latent(i, l) += dec_cf.dx(i, l);
  }
  {
    MlpGrads dec_rec = mlp_backward(g.decoder, rec_cache, d_recon);
    out.d_decoder.add(dec_rec);
    for (int i = 0; i < b; ++i)
      for (int l = 0; l < g.latent_dim; ++l) d_latent(i, l) += dec_rec.dx(i, l);
  }
  Matrix d_enc_out(b, 2 * g.latent_dim);
  for (int i = 0; i < b; ++i)
    for (int l = 0; l < g.latent_dim; ++l) {
      d_enc_out(i, l) = d_latent(i, l) + d_mu(i, l);
      d_enc_out(i, g.latent_dim + l) =
          d_latent(i, l) * eps(i, l) * 0.5 * std::exp(0.5 * enc.logvar(i, l)) + d_logvar(i, l);
    }
  MlpGrads enc_grads = mlp_backward(g.encoder, enc.cache, d_enc_out);
  out.d_encoder.add(enc_grads);

  out.comps.identity = 0.0;  // hard N-constraint: the copy makes the penalty exactly zero
  out.comps.total = out.comps.identity + out.comps.likelihood + out.comps.support + out.comps.leakage;
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct GenTrainConfig {
  int epochs = 60;
  double lr_generator = 0.010;
  double lr_adversary = 0.005;
  GenLossWeights weights;
  double loss_scale = 1.0;  // outer multiplier; zero disables training entirely
};

struct GenTrainResult {
  std::vector<double> loss_history;
  bool aborted = false;
};

// Full-batch alternating-free training: one joint step per epoch updates the
// generator (identity/likelihood/support plus reversed leakage gradients)
// and the adversary (its own cross-entropy) simultaneously.
inline GenTrainResult train_generator(GeneratorParams* g, AdversaryParams* adv,
                                      const Matrix& x_party, const Matrix& z_current,
                                      const Matrix& z_target, const Matrix& context,
                                      const Matrix& reference_mediators, const std::vector<int>& s,
                                      const GenTrainConfig& cfg, RngStream& rng) {
  GenTrainResult result;
  if (cfg.loss_scale == 0.0 || cfg.epochs <= 0 || g->coords.m.empty()) return result;
  const double mmd_sigma =
      reference_mediators.rows() >= 2 ? median_bandwidth(reference_mediators) : 1.0;
  OptState opt_gen(OptHyper{.lr = cfg.lr_generator, .variant = OptVariant::kAdam});
  OptState opt_adv(OptHyper{.lr = cfg.lr_adversary, .variant = OptVariant::kAdam});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Matrix eps(x_party.rows(), g->latent_dim);
    for (int i = 0; i < eps.rows(); ++i)
      for (int l = 0; l < eps.cols(); ++l) eps(i, l) = rng.normal();
    GenLossResult r = gen_loss(x_party, *g, *adv, z_current, z_target, context,
                               reference_mediators, s, cfg.weights, mmd_sigma, eps);
    if (!std::isfinite(r.comps.total)) {
      result.aborted = true;  // keep the last finite parameter snapshot
      return result;
    }
    result.loss_history.push_back(r.comps.total);
    r.d_encoder.scale(cfg.loss_scale);
    r.d_decoder.scale(cfg.loss_scale);
    r.d_adversary.scale(cfg.loss_scale);
    TensorViews gen_params = mlp_params(g->encoder);
    TensorViews dec_params = mlp_params(g->decoder);
    gen_params.insert(gen_params.end(), dec_params.begin(), dec_params.end());
    TensorViews gen_grads = grad_views(r.d_encoder);
    TensorViews dec_grads = grad_views(r.d_decoder);
    gen_grads.insert(gen_grads.end(), dec_grads.begin(), dec_grads.end());
    opt_gen.step(gen_params, gen_grads);
    TensorViews adv_params = mlp_params(adv->net);
    TensorViews adv_grads = grad_views(r.d_adversary);
    opt_adv.step(adv_params, adv_grads);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

// Balanced accuracy of the adversary's argmax prediction over groups; the
// batch must contain every group at least once.
inline std::optional<double> adversary_eval(const AdversaryParams& adv, const Matrix& inputs,
                                            const std::vector<int>& s, int num_groups) {
  check(inputs.rows() == static_cast<int>(s.size()), Error::Kind::kShape,
        "adversary_eval batch mismatch");
  std::vector<int> correct(static_cast<std::size_t>(num_groups), 0);
  std::vector<int> count(static_cast<std::size_t>(num_groups), 0);
  const Matrix logits = mlp_forward(adv.net, inputs, false, nullptr);
  const std::vector<int> pred = argmax_rows(logits);
  for (std::size_t i = 0; i < s.size(); ++i) {
    count[static_cast<std::size_t>(s[i])] += 1;
    if (pred[i] == s[i]) correct[static_cast<std::size_t>(s[i])] += 1;
  }
  double acc = 0.0;
  for (int gp = 0; gp < num_groups; ++gp) {
    if (count[static_cast<std::size_t>(gp)] == 0) return std::nullopt;  // undefined on single-group batches
    acc += static_cast<double>(correct[static_cast<std::size_t>(gp)]) /
           count[static_cast<std::size_t>(gp)];
  }
  return acc / num_groups;
}

struct ValiditySummary {
  double v_id = 0.0;    // mean squared identity error on N
  double v_supp = 0.0;  // biased MMD^2 of generated vs. reference mediators
  double v_leak = 0.5;  // adversary balanced accuracy on generated samples
  bool leak_available = false;
};

inline ValiditySummary validity_summaries(const Matrix& x_party, const Matrix& generated,
                                          const PartyCoords& coords, const AdversaryParams& adv,
                                          const Matrix& reference_mediators,
                                          const std::vector<int>& s, int num_groups) {
  check(x_party.rows() == generated.rows() && x_party.cols() == generated.cols(),
        Error::Kind::kShape, "validity batch shape mismatch");
  ValiditySummary v;
  if (!coords.n.empty()) {
    double sum = 0.0;
    for (int c : coords.n)
      for (int i = 0; i < x_party.rows(); ++i) {
        const double d = generated(i, c) - x_party(i, c);
        sum += d * d;
      }
    v.v_id = sum / (static_cast<double>(x_party.rows()) * coords.n.size());
  }
  if (!coords.m.empty() && reference_mediators.rows() >= 2 && generated.rows() >= 2) {
    KernelSpec spec;
    v.v_supp = mmd2(generated.take_cols(coords.m), reference_mediators, spec, /*biased=*/true);
  }
  Matrix adv_in = coords.p.empty() ? generated.take_cols(coords.n)
                                   : hconcat({generated.take_cols(coords.p), generated.take_cols(coords.n)});
  if (adv_in.cols() == adv.net.input_dim()) {
    if (auto ba = adversary_eval(adv, adv_in, s, num_groups)) {
      v.v_leak = *ba;
      v.leak_available = true;
    }
  }
  return v;
}

}  // namespace sccvfl::cfgen

#endif  // SCCVFL_GENERATOR_HPP_
