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

#ifndef SCCVFL_OPTIM_HPP_
#define SCCVFL_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/nn.hpp"

namespace sccvfl {

enum class OptVariant { kAdam, kAdamW };

struct OptHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled decay, applied only by kAdamW
  OptVariant variant = OptVariant::kAdam;
};

// Adam / AdamW state over a fixed list of parameter tensors.  Accumulator
// shapes are pinned on first use and must match on every step.
class OptState {
 public:
  explicit OptState(OptHyper hyper) : hyper_(hyper) {}

  const OptHyper& hyper() const { return hyper_; }
  OptHyper& hyper() { return hyper_; }
  std::int64_t step_count() const { return step_; }

  void step(const TensorViews& params, const TensorViews& grads) {
    check(params.size() == grads.size(), Error::Kind::kShape, "opt_step param/grad count mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    check(m_.size() == params.size(), Error::Kind::kShape, "opt_step tensor count changed");
    ++step_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
    for (std::size_t t = 0; t < params.size(); ++t) {
      check(params[t].size() == m_[t].size() && grads[t].size() == m_[t].size(), Error::Kind::kShape,
            "opt_step accumulator shape mismatch");
      double* p = params[t].data();
      const double* g = grads[t].data();
      for (std::size_t k = 0; k < params[t].size(); ++k) {
        m_[t][k] = hyper_.beta1 * m_[t][k] + (1.0 - hyper_.beta1) * g[k];
        v_[t][k] = hyper_.beta2 * v_[t][k] + (1.0 - hyper_.beta2) * g[k] * g[k];
        const double mhat = m_[t][k] / bc1;
        const double vhat = v_[t][k] / bc2;
        if (hyper_.variant == OptVariant::kAdamW && hyper_.weight_decay > 0.0)
          p[k] -= hyper_.lr * hyper_.weight_decay * p[k];
        p[k] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
      }
    }
  }

 private:
  OptHyper hyper_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace sccvfl

#endif  // SCCVFL_OPTIM_HPP_
