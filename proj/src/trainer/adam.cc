// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/trainer/adam.h"

#include <cmath>
#include <string>

#include "dronese/numerics/errors.h"

namespace dronese {

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam eps must be positive");
}

OptimizerState make_optimizer_state(const ParamStore<double>& params) {
  OptimizerState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adam_step(ParamStore<double>& params, const std::vector<Tensor<double>>& grads,
               OptimizerState& state, const AdamConfig& cfg) {
  auto& leaves = params.leaves();
  if (grads.size() != leaves.size() || state.m.size() != leaves.size() ||
      state.v.size() != leaves.size()) {
    throw ShapeError("adam_step: " + std::to_string(leaves.size()) + " leaves, " +
                     std::to_string(grads.size()) + " gradients, " +
                     std::to_string(state.m.size()) + " moments");
  }
  ++state.step;
  const double t = double(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (!leaves[i].trainable) continue;
    auto p = leaves[i].tensor.values();
    const auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    if (g.size() != p.size()) {
      throw ShapeError("adam_step: gradient size mismatch for " + leaves[i].name);
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace dronese
