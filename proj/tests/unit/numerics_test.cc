// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dronese/numerics/errors.h"
#include "dronese/numerics/fft.h"
#include "dronese/numerics/grad_check.h"
#include "dronese/numerics/kernels.h"
#include "dronese/numerics/mac_counter.h"
#include "dronese/numerics/ops.h"
#include "test_util.h"

namespace dronese {
namespace {

using testing::dot;
using testing::max_abs_diff;
using testing::random_tensor;

constexpr double kElementTol = 1e-6;

TEST_CASE("conv1d identity kernel passes input through") {
  Tensor<double> x({1, 1, 5}, std::vector<double>{1, 2, 3, 4, 5});
  Tensor<double> w({1, 1, 1}, 1.0);
  Tensor<double> b({1}, 0.0);
  auto y = conv1d(x, w, b, Conv1dSpec{});
  CHECK(y == x);
}

TEST_CASE("conv1d output length and mac count") {
  Conv1dSpec spec{2, 1, 1, 1};
  CHECK(conv1d_output_length(64, 6, spec) == 31);
  auto x = random_tensor({1, 2, 64}, 1);
  auto w = random_tensor({4, 2, 6}, 2);
  auto b = random_tensor({4}, 3);
  MacCounter counter;
  Tensor<double> y;
  {
    MacCountingGuard guard(counter);
    MacScope scope("enc");
    y = conv1d(x, w, b, spec);
  }
  CHECK(y.shape() == Shape{1, 4, 31});
  CHECK(counter.total() == 1488);
  CHECK(counter.at("enc") == 1488);
}

TEST_CASE("conv1d rejects mismatched channels and short inputs") {
  Tensor<double> x({1, 3, 10});
  Tensor<double> w({4, 2, 3});
  Tensor<double> b({4});
  CHECK_THROWS_AS(conv1d(x, w, b, Conv1dSpec{}), ShapeError);
  Tensor<double> w2({4, 3, 12});
  CHECK_THROWS_AS(conv1d(x, w2, b, Conv1dSpec{}), ShapeError);
}

TEST_CASE("conv1d gradient matches finite differences") {
  auto x = random_tensor({2, 2, 20}, 4);
  auto w = random_tensor({3, 2, 4}, 5);
  auto b = random_tensor({3}, 6);
  Conv1dSpec spec{2, 2, 2, 1};
  auto objective = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return ops::conv1d(t, v[0], v[1], v[2], spec);
      },
      {&x, &w, &b});
  CHECK(grad_check(objective, {&x, &w, &b}).max_rel_error < kElementTol);
}

TEST_CASE("conv1d_transposed is the adjoint of conv1d") {
  Conv1dSpec fwd{2, 1, 1, 1};
  ConvTranspose1dSpec bwd{2, 1, 1};
  CHECK(conv1d_transposed_output_length(31, 6, bwd) == 64);
  auto x = random_tensor({1, 2, 64}, 7);
  auto y = random_tensor({1, 4, 31}, 8);
  auto w = random_tensor({4, 2, 6}, 9);
  Tensor<double> zero_out({4}, 0.0);
  Tensor<double> zero_in({2}, 0.0);
  // conv1d uses [C_out, C_in, K]; the transposed op maps C_out back to C_in
  // with layout [C_in', C_out', K] = [4, 2, 6], i.e. the same tensor.
  auto cx = conv1d(x, w, zero_out, fwd);
  auto ty = conv1d_transposed(y, w, zero_in, bwd);
  CHECK(ty.shape() == x.shape());
  CHECK(std::abs(dot(cx, y) - dot(x, ty)) < 1e-10);
}

TEST_CASE("conv1d_transposed identity and gradient") {
  auto x = random_tensor({1, 1, 7}, 10);
  Tensor<double> w({1, 1, 1}, 1.0);
  Tensor<double> b({1}, 0.0);
  CHECK(conv1d_transposed(x, w, b, ConvTranspose1dSpec{}) == x);

  auto x2 = random_tensor({2, 3, 9}, 11);
  auto w2 = random_tensor({3, 2, 5}, 12);
  auto b2 = random_tensor({2}, 13);
  ConvTranspose1dSpec spec{2, 2, 1};
  auto objective = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return ops::conv1d_transposed(t, v[0], v[1], v[2], spec);
      },
      {&x2, &w2, &b2});
  CHECK(grad_check(objective, {&x2, &w2, &b2}).max_rel_error < kElementTol);
}

TEST_CASE("conv2d identity, constant field and gradient") {
  auto x = random_tensor({1, 1, 4, 4}, 14);
  Tensor<double> w({1, 1, 1, 1}, 1.0);
  Tensor<double> b({1}, 0.0);
  CHECK(conv2d(x, w, b, Conv2dSpec{}) == x);

  Tensor<double> ones({1, 1, 5, 5}, 1.0);
  Tensor<double> k({1, 1, 3, 3}, 1.0);
  auto y = conv2d(ones, k, b, Conv2dSpec{});
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (double v : y.values()) CHECK(v == 9.0);

  auto x2 = random_tensor({1, 2, 6, 5}, 15);
  auto w2 = random_tensor({3, 2, 3, 3}, 16);
  auto b2 = random_tensor({3}, 17);
  Conv2dSpec spec{1, 1, 1, 1, 2, 0};
  auto objective = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return ops::conv2d(t, v[0], v[1], v[2], spec);
      },
      {&x2, &w2, &b2});
  CHECK(grad_check(objective, {&x2, &w2, &b2}).max_rel_error < kElementTol);
}

TEST_CASE("linear hand values and gradient") {
  Tensor<double> x({1, 2}, std::vector<double>{3, 4});
  Tensor<double> w({1, 2}, std::vector<double>{1, 1});
  Tensor<double> b({1}, 0.0);
  CHECK(linear(x, w, b)[0] == 7.0);

  Tensor<double> eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  Tensor<double> zb({2}, 0.0);
  CHECK(linear(x, eye, zb) == x);

  auto x2 = random_tensor({3, 2, 5}, 18);
  auto w2 = random_tensor({4, 5}, 19);
  auto b2 = random_tensor({4}, 20);
  auto objective = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return ops::linear(t, v[0], v[1], v[2]);
      },
      {&x2, &w2, &b2});
  CHECK(grad_check(objective, {&x2, &w2, &b2}).max_rel_error < kElementTol);
}

TEST_CASE("grad_check detects a corrupted weight gradient") {
  auto x = random_tensor({3, 5}, 21);
  auto w = random_tensor({4, 5}, 22);
  auto b = random_tensor({4}, 23);
  Objective corrupted = [&](std::vector<Tensor<double>>* grads) {
    auto y = linear(x, w, b);
    Tensor<double> ones(y.shape(), 1.0);
    double total = 0.0;
    for (double v : y.values()) total += v;
    if (grads) {
      Tensor<double> gx, gw, gb;
      linear_backward(x, w, ones, &gx, &gw, &gb);
      for (std::size_t i = 0; i < gw.size(); ++i) gw[i] *= 1.01;
      *grads = {gx, gw, gb};
    }
    return total;
  };
  CHECK(grad_check(corrupted, {&x, &w, &b}).max_rel_error > 1e-3);
  const std::vector<double> steps{1e-6, 1e-5, 1e-7};
  CHECK(grad_check(corrupted, {&x, &w, &b}, steps).max_rel_error > 1e-3);
}

TEST_CASE("multi-step grad_check steps around a kink") {
  // |x| with x just off the kink: the large step straddles it, the small
  // one does not.
  Tensor<double> x({1}, 3e-6);
  Objective kink = [&](std::vector<Tensor<double>>* grads) {
    if (grads) *grads = {Tensor<double>({1}, x[0] > 0 ? 1.0 : -1.0)};
    return std::abs(x[0]);
  };
  CHECK(grad_check(kink, {&x}, 1e-5).max_rel_error > 0.5);
  const auto r = grad_check(kink, {&x}, std::vector<double>{1e-5, 1e-6});
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.numeric == doctest::Approx(1.0));
  CHECK_THROWS_AS(grad_check(kink, {&x}, std::vector<double>{}), ConfigError);
}

TEST_CASE("attention with self-only mask returns the values") {
  auto q = random_tensor({1, 4, 6}, 24);
  auto k = random_tensor({1, 4, 6}, 25);
  auto v = random_tensor({1, 4, 6}, 26);
  AttentionMask eye(4);
  for (std::size_t i = 0; i < 4; ++i) eye.set(i, i, true);
  Tensor<double> probs;
  auto y = masked_attention(q, k, v, 2, eye, &probs);
  CHECK(max_abs_diff(y, v) < 1e-15);
}

TEST_CASE("attention matches a hand-computed softmax") {
  Tensor<double> q({1, 2, 2}, std::vector<double>{1, 0, 0, 1});
  Tensor<double> k({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor<double> v({1, 2, 2}, std::vector<double>{5, 6, 7, 8});
  AttentionMask full(2, true);
  Tensor<double> probs;
  auto y = masked_attention(q, k, v, 1, full, &probs);
  const double s = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < 2; ++i) {
    const double l0 = (q[i * 2] * k[0] + q[i * 2 + 1] * k[1]) * s;
    const double l1 = (q[i * 2] * k[2] + q[i * 2 + 1] * k[3]) * s;
    const double p0 = 1.0 / (1.0 + std::exp(l1 - l0));
    const double p1 = 1.0 - p0;
    CHECK(y[i * 2] == doctest::Approx(p0 * 5 + p1 * 7).epsilon(1e-12));
    CHECK(y[i * 2 + 1] == doctest::Approx(p0 * 6 + p1 * 8).epsilon(1e-12));
  }
}

TEST_CASE("attention weights vanish on masked pairs for banded masks") {
  const std::size_t n = 9;
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t band = 1 + rng() % 4;
    AttentionMask mask(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        mask.set(i, j, (i > j ? i - j : j - i) <= band);
      }
    }
    auto q = random_tensor({2, n, 4}, 100 + trial, 3.0);
    auto k = random_tensor({2, n, 4}, 200 + trial, 3.0);
    auto v = random_tensor({2, n, 4}, 300 + trial);
    Tensor<double> probs;
    masked_attention(q, k, v, 2, mask, &probs);
    for (std::size_t r = 0; r < 2 * 2 * n; ++r) {
      const std::size_t i = r % n;
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = probs[r * n + j];
        if (!mask(i, j)) CHECK(p == 0.0);
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("attention rejects fully masked rows and bad head counts") {
  auto q = random_tensor({1, 3, 4}, 28);
  AttentionMask mask(3, true);
  for (std::size_t j = 0; j < 3; ++j) mask.set(1, j, false);
  Tensor<double> probs;
  CHECK_THROWS_AS(masked_attention(q, q, q, 2, mask, &probs), NumericError);
  AttentionMask full(3, true);
  CHECK_THROWS_AS(masked_attention(q, q, q, 3, full, &probs), ConfigError);
}

TEST_CASE("attention gradient matches finite differences") {
  auto q = random_tensor({2, 5, 4}, 29);
  auto k = random_tensor({2, 5, 4}, 30);
  auto v = random_tensor({2, 5, 4}, 31);
  AttentionMask mask(5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) mask.set(i, j, (i + j) % 3 != 1 || i == j);
  }
  auto objective = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& in) {
        return ops::attention(t, in[0], in[1], in[2], 2, mask);
      },
      {&q, &k, &v});
  CHECK(grad_check(objective, {&q, &k, &v}).max_rel_error < kElementTol);
}

TEST_CASE("elementwise closed forms") {
  Tensor<double> zero({1}, 0.0);
  CHECK(sigmoid(zero)[0] == 0.5);
  Tensor<double> neg({1}, -1.0);
  Tensor<double> slope({1}, 0.2);
  CHECK(prelu(neg, slope, 0)[0] == doctest::Approx(-0.2));

  Tensor<double> c({2, 6}, 3.5);
  Tensor<double> gain({6}, 1.0), shift({6}, 0.0), mean, rstd;
  auto y = layer_norm(c, gain, shift, 1, &mean, &rstd);
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("layer_norm normalizes along the chosen axis") {
  auto x = random_tensor({3, 5, 4}, 33, 4.0);
  Tensor<double> gain({5}, 1.0), shift({5}, 0.0), mean, rstd;
  auto y = layer_norm(x, gain, shift, 1, &mean, &rstd);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t c = 0; c < 4; ++c) {
      double m = 0.0, v = 0.0;
      for (std::size_t i = 0; i < 5; ++i) m += y.at({a, i, c});
      m /= 5;
      for (std::size_t i = 0; i < 5; ++i) v += std::pow(y.at({a, i, c}) - m, 2);
      v /= 5;
      CHECK(std::abs(m) < 1e-12);
      CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
}

TEST_CASE("layer_norm, prelu, sigmoid and scale gradients") {
  auto x = random_tensor({3, 5, 4}, 34);
  auto gain = random_tensor({5}, 35);
  auto shift = random_tensor({5}, 36);
  auto ln = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return ops::layer_norm(t, v[0], v[1], v[2], 1);
      },
      {&x, &gain, &shift});
  CHECK(grad_check(ln, {&x, &gain, &shift}).max_rel_error < kElementTol);

  auto slope = random_tensor({4}, 37);
  auto pr = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return ops::prelu(t, v[0], v[1], 2);
      },
      {&x, &slope});
  CHECK(grad_check(pr, {&x, &slope}).max_rel_error < kElementTol);

  auto sg = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return ops::sigmoid(t, v[0]);
      },
      {&x});
  CHECK(grad_check(sg, {&x}).max_rel_error < kElementTol);

  auto sc = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return ops::scale_along(t, v[0], v[1], 1);
      },
      {&x, &gain});
  CHECK(grad_check(sc, {&x, &gain}).max_rel_error < kElementTol);
}

TEST_CASE("shape ops gradients") {
  auto a = random_tensor({2, 3, 4}, 38);
  auto b = random_tensor({2, 2, 4}, 39);
  auto objective = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        Var c = ops::concat(t, {v[0], v[1]}, 1);
        Var p = ops::permute(t, c, {2, 0, 1});
        Var s = ops::slice(t, p, 2, 1, 4);
        Var r = ops::reshape(t, s, Shape{4, 6});
        return ops::sub(t, ops::add(t, r, r), ops::sigmoid(t, r));
      },
      {&a, &b});
  CHECK(grad_check(objective, {&a, &b}).max_rel_error < kElementTol);
}

TEST_CASE("dropout is identity outside training") {
  auto x = random_tensor({4, 8}, 40);
  std::mt19937_64 rng(1);
  Tensor<double> keep;
  CHECK(dropout(x, 0.1, false, rng, &keep) == x);
  auto y = dropout(x, 0.5, true, rng, &keep);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK((y[i] == 0.0 || std::abs(y[i] - 2.0 * x[i]) < 1e-15));
  }
}

TEST_CASE("tape rejects non-finite values") {
  Tape<double> tape;
  Tensor<double> bad({2}, std::vector<double>{1.0, std::nan("")});
  CHECK_THROWS_AS(tape.push(bad, {}, nullptr, "test"), NumericError);
}

TEST_CASE("rfft of a constant is DC only") {
  std::vector<double> x(1024, 0.75);
  auto X = rfft<double>(x);
  CHECK(X.size() == 513);
  CHECK(std::abs(X[0] - std::complex<double>(1024 * 0.75, 0)) < 1e-9);
  for (std::size_t k = 1; k < X.size(); ++k) CHECK(std::abs(X[k]) < 1e-9);
}

TEST_CASE("rfft of a cosine hits one bin") {
  const std::size_t n = 256, bin = 17;
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = std::cos(2 * std::numbers::pi * double(bin * t) / double(n));
  }
  auto X = rfft<double>(x);
  for (std::size_t k = 0; k < X.size(); ++k) {
    if (k == bin) {
      CHECK(std::abs(X[k]) == doctest::Approx(n / 2.0));
    } else {
      CHECK(std::abs(X[k]) < 1e-9);
    }
  }
}

TEST_CASE("fft round trip and Parseval") {
  for (std::size_t n : {2u, 8u, 64u, 1024u}) {
    auto t = random_tensor({n}, 41 + n);
    auto X = rfft<double>(t.values());
    auto back = irfft<double>(X, n);
    double err = 0.0, energy_t = 0.0, energy_f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err = std::max(err, std::abs(back[i] - t[i]));
      energy_t += t[i] * t[i];
    }
    for (std::size_t k = 0; k < X.size(); ++k) {
      const double w = (k == 0 || k == n / 2) ? 1.0 : 2.0;
      energy_f += w * std::norm(X[k]);
    }
    energy_f /= double(n);
    CHECK(err < 1e-10);
    CHECK(std::abs(energy_f - energy_t) / energy_t < 1e-10);
  }
  CHECK_THROWS_AS(RealFft<double>(1000), ConfigError);
}

TEST_CASE("float kernels agree with double kernels") {
  auto x = random_tensor({1, 2, 40}, 50);
  auto w = random_tensor({3, 2, 5}, 51);
  auto b = random_tensor({3}, 52);
  auto yd = conv1d(x, w, b, Conv1dSpec{2, 1, 2, 2});
  auto yf = conv1d(x.cast<float>(), w.cast<float>(), b.cast<float>(),
                   Conv1dSpec{2, 1, 2, 2});
  CHECK(max_abs_diff(yf.cast<double>(), yd) < 1e-5);
}

}  // namespace
}  // namespace dronese
