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

#ifndef SCCVFL_ATTACKS_HPP_
#define SCCVFL_ATTACKS_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "sccvfl/engine.hpp"
#include "sccvfl/error.hpp"
#include "sccvfl/matrix.hpp"
#include "sccvfl/nn.hpp"
#include "sccvfl/optim.hpp"
#include "sccvfl/rng.hpp"

namespace sccvfl::eval {

struct AttackReport {
  std::map<int, double> aia_sr;       // attacker epochs -> success rate (%)
  std::map<double, double> pgd_sr;    // epsilon -> success rate (%)
  std::uint64_t seed = 0;
  std::string notes;
};

// ---------------------------------------------------------------------------
// Attribute inference attack

struct AiaConfig {
  std::vector<int> budgets = {10, 20, 40, 80};  // attacker training epochs
  int hidden = 64;                               // matches the encoder hidden width
  double lr = 0.005;
  double holdout_frac = 0.5;
};

// Post-hoc attacker on frozen representations: balanced subsample over the
// groups, 50/50 attacker train/eval split, a fresh 2-layer classifier
// trained with Adam, success rate recorded at each budget.  With the
// balanced split, plain accuracy equals balanced accuracy.
inline std::map<int, double> aia_attack(const Matrix& repr, const std::vector<int>& s,
                                        int num_groups, const AiaConfig& cfg, std::uint64_t seed) {
  check(repr.rows() == static_cast<int>(s.size()), Error::Kind::kShape, "aia batch mismatch");
  std::vector<std::vector<int>> by_group(static_cast<std::size_t>(num_groups));
  for (std::size_t i = 0; i < s.size(); ++i)
    by_group[static_cast<std::size_t>(s[i])].push_back(static_cast<int>(i));
  std::size_t min_count = repr.rows() > 0 ? static_cast<std::size_t>(repr.rows()) : 0;
  for (const auto& g : by_group) min_count = std::min(min_count, g.size());
  check(min_count >= 4, Error::Kind::kShape, "a group is absent or too small; attack unavailable");

  RngStream rng = RngStream::substream(seed, "attack/aia");
  std::vector<int> train_rows, eval_rows;
  for (auto& g : by_group) {
    rng.shuffle(g.begin(), g.end());
    const std::size_t take = min_count;
    const std::size_t n_eval = static_cast<std::size_t>(cfg.holdout_frac * take);
    for (std::size_t k = 0; k < take; ++k)
      (k < n_eval ? eval_rows : train_rows).push_back(g[k]);
  }
  rng.shuffle(train_rows.begin(), train_rows.end());

  Matrix xtr = repr.take_rows(train_rows), xev = repr.take_rows(eval_rows);
  std::vector<int> ytr, yev;
  for (int i : train_rows) ytr.push_back(s[static_cast<std::size_t>(i)]);
  for (int i : eval_rows) yev.push_back(s[static_cast<std::size_t>(i)]);

  Mlp attacker = make_mlp({repr.cols(), cfg.hidden, num_groups}, Act::kRelu, Act::kLinear, 0.0, rng);
  OptState opt(OptHyper{.lr = cfg.lr, .variant = OptVariant::kAdam});
  std::map<int, double> sr;
  std::vector<int> budgets = cfg.budgets;
  std::sort(budgets.begin(), budgets.end());
  int trained = 0;
  for (int budget : budgets) {
    for (; trained < budget; ++trained) {
      MlpCache cache;
      const Matrix logits = mlp_forward(attacker, xtr, false, nullptr, &cache);
      const auto xent = softmax_xent(logits, ytr);
      MlpGrads g = mlp_backward(attacker, cache, xent.dlogits);
      TensorViews params = mlp_params(attacker);
      TensorViews grads = grad_views(g);
      opt.step(params, grads);
    }
    const std::vector<int> pred = argmax_rows(mlp_forward(attacker, xev, false, nullptr));
    double correct = 0.0;
    for (std::size_t i = 0; i < yev.size(); ++i) correct += pred[i] == yev[i];
    sr[budget] = 100.0 * correct / static_cast<double>(yev.size());
  }
  return sr;
}

// ---------------------------------------------------------------------------
// Subspace-constrained PGD

struct PgdConfig {
  std::vector<double> epsilons = {0.02, 0.05, 0.10, 0.20};
  int steps = 20;
  // step size is epsilon / 5 per radius
};

struct PgdOutcome {
  double sr = 0.0;                  // percent of clean predictions flipped
  bool constraints_held = true;     // box and support checked per step
  int flipped = 0;
};

// l_inf-bounded signed-gradient ascent restricted to the subspace: delta
// starts at zero, each step adds alpha * sign(grad) and projects back onto
// {supp(delta) subset S, |delta|_inf <= eps}.  The attacked loss is the task
// loss against the model's own clean prediction.
inline PgdOutcome subspace_pgd(const engine::ModelBundle& bundle,
                               const data::VerticalLayout& layout, const Matrix& x,
                               const std::vector<int>& subspace, double epsilon, int steps) {
  check(epsilon >= 0.0, Error::Kind::kDomain, "pgd epsilon must be >= 0");
  PgdOutcome out;
  const std::vector<int> clean_pred = argmax_rows(
      mlp_forward(bundle.head, engine::fuse_forward(bundle, x, layout, false, nullptr), false,
                  nullptr));
  if (subspace.empty() || epsilon == 0.0) {
    out.sr = 0.0;  // empty subspace or zero radius cannot flip anything
    return out;
  }
  std::vector<char> in_subspace(static_cast<std::size_t>(x.cols()), 0);
  for (int c : subspace) in_subspace[static_cast<std::size_t>(c)] = 1;
  const double alpha = epsilon / 5.0;
  Matrix delta(x.rows(), x.cols());
  for (int t = 0; t < steps; ++t) {
    Matrix xp = x;
    xp += delta;
    const Matrix grad = engine::model_input_gradient(bundle, layout, xp, clean_pred);
    for (int i = 0; i < delta.rows(); ++i)
      for (int j = 0; j < delta.cols(); ++j) {
        if (!in_subspace[static_cast<std::size_t>(j)]) {
          delta(i, j) = 0.0;
          continue;
        }
        const double g = grad(i, j);
        delta(i, j) += alpha * (g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0));
        delta(i, j) = std::clamp(delta(i, j), -epsilon, epsilon);
      }
    // Per-step constraint audit.
    for (int i = 0; i < delta.rows() && out.constraints_held; ++i)
      for (int j = 0; j < delta.cols(); ++j)
        if ((!in_subspace[static_cast<std::size_t>(j)] && delta(i, j) != 0.0) ||
            std::fabs(delta(i, j)) > epsilon + 1e-12) {
          out.constraints_held = false;
          break;
        }
  }
  Matrix xadv = x;
  xadv += delta;
  const std::vector<int> adv_pred = argmax_rows(
      mlp_forward(bundle.head, engine::fuse_forward(bundle, xadv, layout, false, nullptr), false,
                  nullptr));
  for (std::size_t i = 0; i < clean_pred.size(); ++i) out.flipped += adv_pred[i] != clean_pred[i];
  out.sr = 100.0 * out.flipped / static_cast<double>(clean_pred.size());
  return out;
}

inline std::map<double, double> pgd_grid(const engine::ModelBundle& bundle,
                                         const data::VerticalLayout& layout, const Matrix& x,
                                         const std::vector<int>& subspace, const PgdConfig& cfg) {
  std::map<double, double> out;
  for (double eps : cfg.epsilons) out[eps] = subspace_pgd(bundle, layout, x, subspace, eps, cfg.steps).sr;
  return out;
}

// Closed-form flip oracle for a linear binary model: under an l_inf budget
// restricted to S, the reachable logit-gap change is eps * ||(w1 - w0)_S||_1,
// so a row flips iff that reach covers its clean margin.
inline std::vector<bool> linear_flip_oracle(const Matrix& w, const std::vector<double>& b,
                                            const Matrix& x, const std::vector<int>& subspace,
                                            double epsilon) {
  check(w.cols() == 2, Error::Kind::kShape, "oracle expects a binary head");
  std::vector<bool> flips;
  for (int i = 0; i < x.rows(); ++i) {
    double f0 = b[0], f1 = b[1];
    for (int j = 0; j < x.cols(); ++j) {
      f0 += x(i, j) * w(j, 0);
      f1 += x(i, j) * w(j, 1);
    }
    const int pred = f1 > f0 ? 1 : 0;
    const double margin = std::fabs(f1 - f0);
    double reach = 0.0;
    for (int j : subspace) reach += std::fabs(w(j, 1) - w(j, 0));
    reach *= epsilon;
    (void)pred;
    flips.push_back(reach > margin);
  }
  return flips;
}

}  // namespace sccvfl::eval

#endif  // SCCVFL_ATTACKS_HPP_
