// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "dronese/model/checkpoint.h"
#include "dronese/model/params.h"

namespace dronese {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Zero moments shaped like `params`, step 0.
OptimizerState make_optimizer_state(const ParamStore<double>& params);

// One bias-corrected Adam update of every trainable leaf:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Frozen leaves keep their values and moments.
void adam_step(ParamStore<double>& params, const std::vector<Tensor<double>>& grads,
               OptimizerState& state, const AdamConfig& cfg);

}  // namespace dronese
