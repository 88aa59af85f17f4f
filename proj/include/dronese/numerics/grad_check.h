// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "dronese/numerics/tape.h"

namespace dronese {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// |a - b| / max(|a|, |b|, 1e-12).
double relative_error(double analytic, double numeric);

// Evaluates the scalar objective at the current input values. When `grads`
// is non-null it must also fill one analytic gradient per input.
using Objective = std::function<double(std::vector<Tensor<double>>* grads)>;

// Central differences with step h over every coordinate of every input
// (or, when max_coords > 0, a seeded random subset of that many per input).
// Inputs are perturbed in place and restored.
GradCheckResult grad_check(const Objective& objective,
                           const std::vector<Tensor<double>*>& inputs,
                           double h = 1e-6, std::size_t max_coords = 0,
                           std::uint64_t seed = 0);

// Same, trying each step per coordinate and keeping the estimate closest to
// the analytic value. Roundoff spoils small steps and activation kinks spoil
// large ones, but a wrong analytic gradient disagrees at every step.
GradCheckResult grad_check(const Objective& objective,
                           const std::vector<Tensor<double>*>& inputs,
                           const std::vector<double>& steps, std::size_t max_coords = 0,
                           std::uint64_t seed = 0);

// Builds an Objective from a tape-level op: inputs are bound as parameters,
// and a tensor-valued output is reduced to a scalar through a fixed random
// projection drawn from `seed`.
using TapeOp =
    std::function<Var(Tape<double>& tape, const std::vector<Var>& inputs)>;
Objective tape_objective(TapeOp op, const std::vector<Tensor<double>*>& inputs,
                         std::uint64_t seed = 7);

}  // namespace dronese
