// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <random>

#include "doctest.h"
#include "dronese/loss/losses.h"
#include "dronese/numerics/errors.h"
#include "dronese/numerics/grad_check.h"
#include "test_util.h"

namespace dronese {
namespace {

using testing::random_tensor;

Spectrogram<double> random_spec(std::size_t F, std::size_t T, std::uint64_t seed,
                                StftConfig cfg = {64, 32, 16000}) {
  Spectrogram<double> s(F, T, cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  for (std::size_t i = 0; i < s.real.size(); ++i) {
    s.real[i] = dist(rng);
    s.imag[i] = dist(rng);
  }
  return s;
}

std::vector<double> random_wave(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}

TEST_CASE("magnitude loss endpoints and oracle") {
  auto s = random_spec(33, 9, 1);
  CHECK(loss_mag(s, s) == 0.0);
  auto ten = s;
  for (auto& v : ten.real.values()) v *= 10.0;
  for (auto& v : ten.imag.values()) v *= 10.0;
  CHECK(loss_mag(ten, s) == doctest::Approx(1.0).epsilon(1e-12));

  auto e = random_spec(33, 9, 2);
  double oracle = 0.0;
  for (std::size_t i = 0; i < e.real.size(); ++i) {
    const double a = std::log10(std::max(std::hypot(e.real[i], e.imag[i]), 1e-8));
    const double b = std::log10(std::max(std::hypot(s.real[i], s.imag[i]), 1e-8));
    oracle += (a - b) * (a - b);
  }
  oracle /= double(e.real.size());
  CHECK(std::abs(loss_mag(e, s) - oracle) < 1e-12);
  CHECK_THROWS_AS(loss_mag(e, random_spec(33, 8, 3)), ShapeError);
}

TEST_CASE("complex loss endpoints and oracle") {
  auto s = random_spec(33, 9, 4);
  CHECK(loss_complex(s, s) == 0.0);
  auto e = s;
  e.real.at({5, 3}) += 3.0;
  e.imag.at({5, 3}) += 4.0;
  CHECK(loss_complex(e, s) == doctest::Approx(25.0 / (33 * 9)).epsilon(1e-12));

  auto r = random_spec(33, 9, 5);
  double oracle = 0.0;
  for (std::size_t i = 0; i < r.real.size(); ++i) {
    oracle += std::norm(std::complex<double>(r.real[i] - s.real[i], r.imag[i] - s.imag[i]));
  }
  CHECK(std::abs(loss_complex(r, s) - oracle / double(r.real.size())) < 1e-12);
  CHECK(cmse(r, s) == loss_complex(r, s));
}

TEST_CASE("stft loss is the beta mix") {
  auto e = random_spec(33, 9, 6), s = random_spec(33, 9, 7);
  LossWeights w;
  w.beta = 0.0;
  CHECK(loss_stft(e, s, w) == loss_mag(e, s));
  w.beta = 1.0;
  CHECK(loss_stft(e, s, w) == loss_complex(e, s));
  w.beta = 0.7;
  CHECK(std::abs(loss_stft(e, s, w) - (0.3 * loss_mag(e, s) + 0.7 * loss_complex(e, s))) < 1e-12);
  w.beta = 1.5;
  CHECK_THROWS_AS(loss_stft(e, s, w), ConfigError);
}

TEST_CASE("SI-SDR cap, scale invariance and orthogonal noise") {
  auto s = random_wave(4000, 8);
  CHECK(loss_time_sisdr<double>(s, s) == doctest::Approx(-100.0).epsilon(1e-12));
  std::vector<double> two(s), neg(s);
  for (auto& v : two) v *= 2.0;
  for (auto& v : neg) v = -v;
  CHECK(loss_time_sisdr<double>(two, s) == loss_time_sisdr<double>(s, s));
  CHECK(si_sdr<double>(neg, s) == doctest::Approx(100.0).epsilon(1e-12));

  // n orthogonal to s with |n|^2 = |s|^2 / 100.
  auto n = random_wave(4000, 9);
  double sn = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sn += s[i] * n[i];
    ss += s[i] * s[i];
  }
  for (std::size_t i = 0; i < s.size(); ++i) n[i] -= sn / ss * s[i];
  double nn = 0.0;
  for (double v : n) nn += v * v;
  const double k = std::sqrt(ss / 100.0 / nn);
  std::vector<double> est(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) est[i] = s[i] + k * n[i];
  CHECK(std::abs(si_sdr<double>(est, s) - 20.0) < 1e-6);
  CHECK(std::abs(loss_time_sisdr<double>(est, s) + 20.0) < 1e-6);

  for (double a : {0.01, 0.5, 3.0, 1000.0}) {
    std::vector<double> scaled(est);
    for (auto& v : scaled) v *= a;
    CHECK(std::abs(si_sdr<double>(scaled, s) - si_sdr<double>(est, s)) < 1e-10);
  }
  std::vector<double> zeros(4000, 0.0);
  CHECK_THROWS_AS(si_sdr<double>(s, zeros), DataError);
}

TEST_CASE("SI-SDR gradient matches finite differences") {
  auto s = random_wave(300, 10);
  auto x = random_wave(300, 11);
  for (std::size_t i = 0; i < s.size(); ++i) x[i] = s[i] + 0.3 * x[i];
  Tensor<double> xt({300}, x);
  Objective obj = [&](std::vector<Tensor<double>>* grads) {
    std::vector<double> g;
    const double v = loss_time_sisdr<double>(xt.values(), s, kSiSdrEpsilon,
                                             grads ? &g : nullptr);
    if (grads) *grads = {Tensor<double>({300}, g)};
    return v;
  };
  // The loss sits near 10 dB, so h = 1e-6 leaves ~1e-9 of rounding in each
  // difference; a larger step keeps small coordinates resolvable.
  auto r = grad_check(obj, {&xt}, 1e-4);
  INFO(r.worst_index << " " << r.analytic << " " << r.numeric);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("LSD endpoints and oracle") {
  auto s = random_spec(33, 9, 12);
  CHECK(lsd(s, s) == 0.0);
  auto ten = s;
  for (auto& v : ten.real.values()) v *= 10.0;
  for (auto& v : ten.imag.values()) v *= 10.0;
  CHECK(lsd(ten, s) == doctest::Approx(20.0).epsilon(1e-12));

  auto e = random_spec(33, 9, 13);
  double oracle = 0.0;
  for (std::size_t t = 0; t < 9; ++t) {
    double acc = 0.0;
    for (std::size_t f = 0; f < 33; ++f) {
      const double a = 20 * std::log10(std::max(std::hypot(e.real.at({f, t}), e.imag.at({f, t})), 1e-8));
      const double b = 20 * std::log10(std::max(std::hypot(s.real.at({f, t}), s.imag.at({f, t})), 1e-8));
      acc += (a - b) * (a - b);
    }
    oracle += std::sqrt(acc / 33.0);
  }
  CHECK(std::abs(lsd(e, s) - oracle / 9.0) < 1e-10);
}

TEST_CASE("total loss composition") {
  auto e = random_spec(33, 9, 14), s = random_spec(33, 9, 15);
  auto ew = random_wave(256, 16), sw = random_wave(256, 17);
  LossWeights w;
  auto b = total_loss<double>(e, s, ew, sw, w);
  CHECK(b.stft == doctest::Approx(loss_stft(e, s, w)).epsilon(1e-14));
  CHECK(b.total == doctest::Approx(b.stft + 0.5 * b.time).epsilon(1e-14));
  w.alpha = 0.0;
  CHECK(total_loss<double>(e, s, ew, sw, w).total == loss_stft(e, s, w));

  auto perfect = total_loss<double>(s, s, sw, sw, LossWeights{});
  CHECK(perfect.stft == 0.0);
  CHECK(perfect.time == doctest::Approx(-100.0).epsilon(1e-12));
}

TEST_CASE("spectral loss gradients match finite differences") {
  auto e = random_spec(9, 5, 18, StftConfig{16, 8, 16000});
  auto s = random_spec(9, 5, 19, StftConfig{16, 8, 16000});
  LossWeights w;
  w.lsd_weight = 0.3;
  w.cmse_weight = 0.2;
  Objective obj = [&](std::vector<Tensor<double>>* grads) {
    Spectrogram<double> g;
    std::vector<double> wave(40, 0.0), gw;
    wave[3] = 1.0;
    auto b = total_loss<double>(e, s, wave, wave, w, grads ? &g : nullptr,
                                grads ? &gw : nullptr);
    if (grads) *grads = {g.real, g.imag};
    return b.total;
  };
  auto r = grad_check(obj, {&e.real, &e.imag}, 1e-4);
  INFO(r.worst_input << " " << r.worst_index << " " << r.analytic << " " << r.numeric);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("total loss op gradient through the inverse STFT") {
  StftConfig cfg{16, 8, 16000};
  auto clean = random_wave(60, 20);
  auto ref = stft<double>(clean, cfg);
  auto out = random_tensor({1, 2, ref.bins(), ref.frames()}, 21);
  auto objective = tape_objective(
      [&](Tape<double>& t, const std::vector<Var>& v) {
        return total_loss_op<double>(t, v[0], ref, clean, LossWeights{});
      },
      {&out});
  CHECK(grad_check(objective, {&out}).max_rel_error < 1e-6);
}

}  // namespace
}  // namespace dronese
