// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/numerics/grad_check.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <random>

#include "dronese/numerics/errors.h"

namespace dronese {

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const Objective& objective,
                           const std::vector<Tensor<double>*>& inputs,
                           double h, std::size_t max_coords,
                           std::uint64_t seed) {
  return grad_check(objective, inputs, std::vector<double>{h}, max_coords, seed);
}

GradCheckResult grad_check(const Objective& objective,
                           const std::vector<Tensor<double>*>& inputs,
                           const std::vector<double>& steps, std::size_t max_coords,
                           std::uint64_t seed) {
  if (steps.empty()) throw ConfigError("grad_check: no finite-difference steps");
  std::vector<Tensor<double>> grads;
  objective(&grads);
  if (grads.size() != inputs.size()) {
    throw Error("grad_check: objective returned " +
                std::to_string(grads.size()) + " gradients for " +
                std::to_string(inputs.size()) + " inputs");
  }
  GradCheckResult result;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor<double>& x = *inputs[i];
    if (grads[i].size() != x.size()) {
      throw ShapeError("grad_check: gradient " + std::to_string(i) +
                       " has shape " + shape_string(grads[i].shape()) +
                       ", input has " + shape_string(x.shape()));
    }
    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords > 0 && coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    for (std::size_t c : coords) {
      const double saved = x[c];
      double err = 0.0, fd = 0.0;
      for (std::size_t k = 0; k < steps.size(); ++k) {
        const double h = steps[k];
        x[c] = saved + h;
        const double up = objective(nullptr);
        x[c] = saved - h;
        const double down = objective(nullptr);
        x[c] = saved;
        const double est = (up - down) / (2.0 * h);
        const double e = relative_error(grads[i][c], est);
        if (k == 0 || e < err) {
          err = e;
          fd = est;
        }
      }
      ++result.coordinates;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = i;
        result.worst_index = c;
        result.analytic = grads[i][c];
        result.numeric = fd;
      }
    }
  }
  return result;
}

Objective tape_objective(TapeOp op, const std::vector<Tensor<double>*>& inputs,
                         std::uint64_t seed) {
  auto projection = std::make_shared<Tensor<double>>();
  // The first evaluation's value is subtracted from every later one so the
  // differences the harness forms are not swamped by rounding of a large
  // total.
  auto baseline = std::make_shared<std::optional<long double>>();
  return [op = std::move(op), inputs, projection, baseline,
          seed](std::vector<Tensor<double>>* grads) {
    Tape<double> tape(grads != nullptr);
    std::vector<Tensor<double>> sinks(inputs.size());
    std::vector<Var> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      vars.push_back(tape.parameter(*inputs[i], grads ? &sinks[i] : nullptr));
    }
    Var y = op(tape, vars);
    const Tensor<double>& yv = tape.value(y);
    if (projection->shape() != yv.shape()) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      *projection = Tensor<double>(yv.shape());
      for (std::size_t k = 0; k < projection->size(); ++k) {
        (*projection)[k] = normal(rng);
      }
    }
    long double total = 0.0L;
    for (std::size_t k = 0; k < yv.size(); ++k) {
      total += static_cast<long double>((*projection)[k]) * yv[k];
    }
    if (!baseline->has_value()) *baseline = total;
    if (grads) {
      Tensor<double> scalar(Shape{1}, static_cast<double>(total));
      Var s = tape.push(
          std::move(scalar), {y},
          [y, projection](Tape<double>& t, const Tensor<double>& g) {
            Tensor<double>& gy = t.grad(y);
            for (std::size_t k = 0; k < gy.size(); ++k) {
              gy[k] += g[0] * (*projection)[k];
            }
          },
          "projection");
      tape.backward(s);
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (sinks[i].empty()) sinks[i] = Tensor<double>(inputs[i]->shape());
      }
      *grads = std::move(sinks);
    }
    return static_cast<double>(total - **baseline);
  };
}

}  // namespace dronese
