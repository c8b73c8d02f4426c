#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "earlyshape/error.hpp"
#include "earlyshape/nn.hpp"
#include "earlyshape/numerics.hpp"

namespace earlyshape {

/// Every weight and bias i.i.d. uniform on [-0.5, 0.5), drawn in tensor order.
inline NetworkParams init_params(const NetworkConfig& cfg, Rng& rng) {
  auto p = ParameterSet::zeros(cfg);
  for (auto t : p.tensors()) {
    for (auto& v : t.values) v = rng.uniform(-0.5, 0.5);
  }
  return p;
}

struct RmsPropState {
  double lr = 1e-3;
  double alpha = 0.9;
  double eps = 1e-8;
  ParameterSet cache;  // running mean of squared gradients

  RmsPropState(const NetworkConfig& cfg, double lr_ = 1e-3, double alpha_ = 0.9, double eps_ = 1e-8)
      : lr(lr_), alpha(alpha_), eps(eps_), cache(ParameterSet::zeros(cfg)) {}
};

/// One RMSprop update with L2 decay on weights (biases are not decayed):
///   g     <- grad + weight_decay * theta
///   cache <- alpha * cache + (1 - alpha) * g^2
///   theta <- theta - lr * g / (sqrt(cache) + eps)
inline void rmsprop_step(RmsPropState& state, NetworkParams& params, const Gradients& grads, double weight_decay) {
  auto p = params.tensors();
  auto g = grads.tensors();
  auto c = state.cache.tensors();
  if (p.size() != g.size() || p.size() != c.size()) throw ShapeError("rmsprop_step: layout mismatch");
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t].values.size() != g[t].values.size() || p[t].values.size() != c[t].values.size()) {
      throw ShapeError("rmsprop_step: tensor " + std::to_string(t) + " shape mismatch");
    }
    const double decay = p[t].kind == TensorKind::weight ? weight_decay : 0.0;
    auto theta = p[t].values;
    auto grad = g[t].values;
    auto ms = c[t].values;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (!std::isfinite(grad[i])) {
        throw NumericError("rmsprop_step: non-finite gradient in tensor " + std::to_string(t));
      }
      const double gi = grad[i] + decay * theta[i];
      ms[i] = state.alpha * ms[i] + (1.0 - state.alpha) * gi * gi;
      theta[i] -= state.lr * gi / (std::sqrt(ms[i]) + state.eps);
    }
  }
}

/// Fresh random permutation of `indices`, chunked into batches; the final
/// short batch is kept.
inline std::vector<std::vector<std::size_t>> make_minibatches(std::vector<std::size_t> indices,
                                                              std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw RangeError("make_minibatches: batch size must be positive");
  rng.shuffle(indices);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const std::size_t end = std::min(indices.size(), start + batch_size);
    batches.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(start),
                         indices.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace earlyshape
