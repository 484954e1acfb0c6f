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

#ifndef SCCVFL_NN_HPP_
#define SCCVFL_NN_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sccvfl/error.hpp"
#include "sccvfl/matrix.hpp"
#include "sccvfl/rng.hpp"

namespace sccvfl {

enum class Act { kRelu, kLinear };

// One fully connected layer: y = act(x W + b), with optional inverted
// dropout applied to the layer output at train time (so evaluation needs no
// rescaling).
struct DenseLayer {
  Matrix w;               // in x out
  std::vector<double> b;  // out
  Act act = Act::kRelu;
  double dropout = 0.0;   // rate in [0, 1)
};

// A small MLP with hand-derived backpropagation.
struct Mlp {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().w.rows(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().w.cols(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
  }
};

// He-style initialization; draw order is fixed (weights row-major, then
// biases, layer by layer) so runs are reproducible across configurations
// that share a stream.
inline Mlp make_mlp(const std::vector<int>& dims, const std::vector<Act>& acts,
                    const std::vector<double>& dropouts, RngStream& rng) {
  check(dims.size() >= 2, Error::Kind::kShape, "mlp needs at least one layer");
  check(acts.size() == dims.size() - 1 && dropouts.size() == dims.size() - 1, Error::Kind::kShape,
        "mlp spec length mismatch");
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.w = Matrix(dims[l], dims[l + 1]);
    const double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
    for (int i = 0; i < layer.w.rows(); ++i)
      for (int j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = scale * rng.normal();
    layer.b.assign(static_cast<std::size_t>(dims[l + 1]), 0.0);
    layer.act = acts[l];
    check(dropouts[l] >= 0.0 && dropouts[l] < 1.0, Error::Kind::kDomain, "dropout rate outside [0,1)");
    layer.dropout = dropouts[l];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline Mlp make_mlp(const std::vector<int>& dims, Act hidden_act, Act final_act, double dropout,
                    RngStream& rng) {
  std::vector<Act> acts(dims.size() - 1, hidden_act);
  acts.back() = final_act;
  std::vector<double> drops(dims.size() - 1, dropout);
  drops.back() = 0.0;  // no dropout on the output layer
  return make_mlp(dims, acts, drops, rng);
}

// Forward cache for the matching backward call.  The cache is tied to the
// exact parameters and inputs it was produced with; reusing a stale cache is
// a contract violation detected via a generation counter on the inputs hash.
struct MlpCache {
  Matrix input;
  std::vector<Matrix> pre;       // pre-activation per layer
  std::vector<Matrix> post;      // post-activation (after dropout) per layer
  std::vector<Matrix> dropmask;  // scaled keep mask per layer (empty if unused)
  bool train_mode = false;
  std::uint64_t stamp = 0;
};

inline std::uint64_t mlp_stamp(const Mlp& net) {
  // Cheap identity stamp: mixes shapes and a few parameter bytes.  Used only
  // to detect forward/backward pairing mistakes, not as a content hash.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (const auto& l : net.layers) {
    mix(static_cast<std::uint64_t>(l.w.rows()) << 32 | static_cast<std::uint64_t>(l.w.cols()));
    if (l.w.size() > 0) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(double));
      __builtin_memcpy(&bits, l.w.data(), sizeof(bits));
      mix(bits);
    }
  }
  return h;
}

inline Matrix mlp_forward(const Mlp& net, const Matrix& x, bool train_mode, RngStream* rng,
                          MlpCache* cache = nullptr) {
  check(!net.layers.empty(), Error::Kind::kShape, "empty mlp");
  check(x.cols() == net.input_dim(), Error::Kind::kShape,
        "mlp input width " + std::to_string(x.cols()) + " != " + std::to_string(net.input_dim()));
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
    cache->dropmask.clear();
    cache->train_mode = train_mode;
    cache->stamp = mlp_stamp(net);
  }
  Matrix h = x;
  for (const DenseLayer& layer : net.layers) {
    Matrix z = matmul(h, layer.w);
    for (int i = 0; i < z.rows(); ++i)
      for (int j = 0; j < z.cols(); ++j) z(i, j) += layer.b[j];
    if (cache) cache->pre.push_back(z);
    if (layer.act == Act::kRelu) {
      for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j)
          if (z(i, j) < 0.0) z(i, j) = 0.0;
    }
    Matrix mask;
    if (train_mode && layer.dropout > 0.0) {
      check(rng != nullptr, Error::Kind::kContract, "train-mode dropout needs an rng stream");
      const double keep = 1.0 - layer.dropout;
      mask = Matrix(z.rows(), z.cols());
      for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j) mask(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
      for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j) z(i, j) *= mask(i, j);
    }
    if (cache) {
      cache->dropmask.push_back(mask);
      cache->post.push_back(z);
    }
    h = std::move(z);
  }
  return h;
}

// Forward pass that reuses the dropout masks recorded in `donor`, so a
// second pass over edited inputs sees the identical stochastic realization.
inline Matrix mlp_forward_reuse(const Mlp& net, const Matrix& x, const MlpCache& donor,
                                MlpCache* cache = nullptr) {
  check(donor.dropmask.size() == net.layers.size(), Error::Kind::kContract,
        "donor cache does not match network depth");
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
    cache->dropmask.clear();
    cache->train_mode = donor.train_mode;
    cache->stamp = mlp_stamp(net);
  }
  Matrix h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& layer = net.layers[l];
    Matrix z = matmul(h, layer.w);
    for (int i = 0; i < z.rows(); ++i)
      for (int j = 0; j < z.cols(); ++j) z(i, j) += layer.b[j];
    if (cache) cache->pre.push_back(z);
    if (layer.act == Act::kRelu) {
      for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j)
          if (z(i, j) < 0.0) z(i, j) = 0.0;
    }
    const Matrix& mask = donor.dropmask[l];
    if (!mask.empty()) {
      check(mask.rows() == z.rows() && mask.cols() == z.cols(), Error::Kind::kShape,
            "donor dropout mask shape mismatch");
      for (int i = 0; i < z.rows(); ++i)
        for (int j = 0; j < z.cols(); ++j) z(i, j) *= mask(i, j);
    }
    if (cache) {
      cache->dropmask.push_back(mask);
      cache->post.push_back(z);
    }
    h = std::move(z);
  }
  return h;
}

struct MlpGrads {
  std::vector<Matrix> dw;
  std::vector<std::vector<double>> db;
  Matrix dx;  // gradient w.r.t. the input batch; consumed by PGD and GRL paths

  void add(const MlpGrads& o) {
    for (std::size_t l = 0; l < dw.size(); ++l) {
      dw[l] += o.dw[l];
      for (std::size_t j = 0; j < db[l].size(); ++j) db[l][j] += o.db[l][j];
    }
  }

  void scale(double c) {
    for (auto& m : dw) m *= c;
    for (auto& v : db)
      for (double& x : v) x *= c;
  }
};

inline MlpGrads zero_grads(const Mlp& net) {
  MlpGrads g;
  for (const auto& l : net.layers) {
    g.dw.emplace_back(l.w.rows(), l.w.cols());
    g.db.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

// Exact gradients of the forward map recorded in `cache`.
inline MlpGrads mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& grad_out) {
  check(cache.stamp == mlp_stamp(net), Error::Kind::kContract,
        "mlp_backward called with a cache from different parameters");
  check(cache.pre.size() == net.layers.size(), Error::Kind::kContract, "stale or empty cache");
  check(grad_out.rows() == cache.input.rows() && grad_out.cols() == net.output_dim(),
        Error::Kind::kShape, "grad_out shape mismatch");
  MlpGrads g = zero_grads(net);
  Matrix delta = grad_out;
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const DenseLayer& layer = net.layers[static_cast<std::size_t>(l)];
    const Matrix& mask = cache.dropmask[static_cast<std::size_t>(l)];
    if (!mask.empty()) {
      for (int i = 0; i < delta.rows(); ++i)
        for (int j = 0; j < delta.cols(); ++j) delta(i, j) *= mask(i, j);
    }
    if (layer.act == Act::kRelu) {
      const Matrix& pre = cache.pre[static_cast<std::size_t>(l)];
      for (int i = 0; i < delta.rows(); ++i)
        for (int j = 0; j < delta.cols(); ++j)
          if (pre(i, j) <= 0.0) delta(i, j) = 0.0;
    }
    const Matrix& below = l == 0 ? cache.input : cache.post[static_cast<std::size_t>(l - 1)];
    g.dw[static_cast<std::size_t>(l)] = matmul_tn(below, delta);
    for (int i = 0; i < delta.rows(); ++i)
      for (int j = 0; j < delta.cols(); ++j) g.db[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] += delta(i, j);
    delta = matmul_nt(delta, layer.w);
  }
  g.dx = std::move(delta);
  return g;
}

// Gradient reversal: identity on forward values; the backward pass scales the
// incoming gradient by -lambda.  Forward needs no code at all, so only the
// backward map is provided.
inline Matrix grl_backward(const Matrix& grad, double lambda) {
  check(lambda >= 0.0, Error::Kind::kDomain, "grl lambda must be >= 0");
  Matrix out = grad;
  out *= -lambda;
  return out;
}

struct SoftmaxXent {
  double loss = 0.0;
  Matrix dlogits;      // (softmax - onehot) / n
  Matrix probs;        // row-wise softmax, kept for metrics
};

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (int i = 0; i < logits.rows(); ++i) {
    double mx = logits(i, 0);
    for (int j = 1; j < logits.cols(); ++j) mx = std::max(mx, logits(i, j));
    double z = 0.0;
    for (int j = 0; j < logits.cols(); ++j) {
      p(i, j) = std::exp(logits(i, j) - mx);
      z += p(i, j);
    }
    for (int j = 0; j < logits.cols(); ++j) p(i, j) /= z;
  }
  return p;
}

// Mean cross-entropy over the batch with its logit gradient.
inline SoftmaxXent softmax_xent(const Matrix& logits, const std::vector<int>& y) {
  check(logits.rows() == static_cast<int>(y.size()), Error::Kind::kShape, "softmax_xent batch mismatch");
  SoftmaxXent out;
  out.probs = softmax_rows(logits);
  out.dlogits = out.probs;
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  for (int i = 0; i < logits.rows(); ++i) {
    check(y[static_cast<std::size_t>(i)] >= 0 && y[static_cast<std::size_t>(i)] < logits.cols(),
          Error::Kind::kShape, "label outside class count");
    const double p = std::max(out.probs(i, y[static_cast<std::size_t>(i)]), 1e-300);
    out.loss -= std::log(p);
    out.dlogits(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  }
  out.loss *= inv_n;
  out.dlogits *= inv_n;
  return out;
}

inline std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (int i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

// Flat views over a model's parameters in a fixed traversal order, shared by
// the optimizer, the serializer, and the finite-difference oracle.
using TensorViews = std::vector<std::span<double>>;

inline TensorViews mlp_params(Mlp& net) {
  TensorViews v;
  for (auto& l : net.layers) {
    v.emplace_back(l.w.data(), l.w.size());
    v.emplace_back(l.b.data(), l.b.size());
  }
  return v;
}

inline TensorViews grad_views(MlpGrads& g) {
  TensorViews v;
  for (std::size_t l = 0; l < g.dw.size(); ++l) {
    v.emplace_back(g.dw[l].data(), g.dw[l].size());
    v.emplace_back(g.db[l].data(), g.db[l].size());
  }
  return v;
}

}  // namespace sccvfl

#endif  // SCCVFL_NN_HPP_
