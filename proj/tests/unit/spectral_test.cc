// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "dronese/numerics/errors.h"
#include "dronese/spectral/bands.h"
#include "dronese/spectral/stft.h"
#include "test_util.h"

namespace dronese {
namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.3);
  std::vector<double> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}

// Scale-invariant SDR written directly from its definition.
double oracle_si_sdr(const std::vector<double>& est,
                     const std::vector<double>& ref) {
  double dot = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    dot += est[i] * ref[i];
    energy += ref[i] * ref[i];
  }
  const double a = dot / energy;
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double s = a * ref[i];
    target += s * s;
    noise += (est[i] - s) * (est[i] - s);
  }
  return 10.0 * std::log10(target / noise);
}

TEST_CASE("stft framing for five seconds") {
  std::vector<double> x(80000, 0.0);
  auto spec = stft<double>(x, StftConfig{});
  CHECK(spec.bins() == 513);
  CHECK(spec.frames() == 157);
  for (double v : spec.real.values()) CHECK(v == 0.0);
  for (double v : spec.imag.values()) CHECK(v == 0.0);
}

TEST_CASE("a 1 kHz tone peaks at bin 64 in every frame") {
  // Cosine phase and a length whose last sample sits on a period boundary
  // keep the mirrored edge frames free of phase jumps.
  std::vector<double> x(16001);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::cos(2 * std::numbers::pi * 1000.0 * double(i) / 16000.0);
  }
  auto spec = stft<double>(x, StftConfig{});
  auto mag = spec.magnitude();
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t f = 0; f < spec.bins(); ++f) {
      if (mag.at({f, t}) > mag.at({best, t})) best = f;
    }
    CHECK(best == 64);
  }
}

TEST_CASE("stft rejects empty input and bad configs") {
  std::vector<double> empty;
  CHECK_THROWS_AS(stft<double>(empty, StftConfig{}), DataError);
  std::vector<double> x(100, 1.0);
  CHECK_THROWS_AS(stft<double>(x, StftConfig{1000, 500, 16000}), ConfigError);
}

TEST_CASE("istft inverts stft") {
  auto x = white_noise(16000, 1);
  auto y = istft(stft<double>(x, StftConfig{}), x.size());
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - y[i]));
  CHECK(err < 1e-6);

  auto speech_len = white_noise(80000, 2);
  auto z = istft(stft<double>(speech_len, StftConfig{}), speech_len.size());
  CHECK(oracle_si_sdr(z, speech_len) > 100.0);
}

TEST_CASE("istft round trip holds for lengths not aligned to the hop") {
  for (std::size_t len : {1u, 7u, 513u, 1000u, 1537u, 4096u, 5000u}) {
    auto x = white_noise(len, len);
    StftConfig cfg{64, 32, 16000};
    auto y = istft(stft<double>(x, cfg), len);
    for (std::size_t i = 0; i < len; ++i) CHECK(std::abs(x[i] - y[i]) < 1e-9);
  }
}

TEST_CASE("istft of zeros is zero and metadata is checked") {
  Spectrogram<double> spec(513, 10, StftConfig{});
  for (double v : istft(spec, 4000)) CHECK(v == 0.0);
  Spectrogram<double> bad(100, 10, StftConfig{});
  CHECK_THROWS_AS(istft(bad, 4000), ConfigError);
}

TEST_CASE("stft is linear") {
  auto a = white_noise(6000, 3), b = white_noise(6000, 4);
  std::vector<double> mix(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
  auto sa = stft<double>(a, StftConfig{}), sb = stft<double>(b, StftConfig{});
  auto sm = stft<double>(mix, StftConfig{});
  for (std::size_t i = 0; i < sm.real.size(); ++i) {
    CHECK(std::abs(sm.real[i] - (2.0 * sa.real[i] - 0.5 * sb.real[i])) < 1e-9);
    CHECK(std::abs(sm.imag[i] - (2.0 * sa.imag[i] - 0.5 * sb.imag[i])) < 1e-9);
  }
}

TEST_CASE("istft_backward is the adjoint of istft") {
  StftConfig cfg{64, 32, 16000};
  const std::size_t len = 300;
  auto x = white_noise(len, 5);
  auto spec = stft<double>(x, cfg);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> dist;
  Spectrogram<double> probe(spec.bins(), spec.frames(), cfg);
  for (std::size_t i = 0; i < probe.real.size(); ++i) {
    probe.real[i] = dist(rng);
    probe.imag[i] = dist(rng);
  }
  std::vector<double> g(len);
  for (auto& v : g) v = dist(rng);
  // <istft(probe), g> == <probe, istft_backward(g)> restricted to the parts
  // irfft actually reads (imaginary DC/Nyquist ignored).
  auto y = istft(probe, len);
  auto back = istft_backward(probe, std::span<const double>(g));
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < len; ++i) lhs += y[i] * g[i];
  for (std::size_t i = 0; i < probe.real.size(); ++i) {
    rhs += probe.real[i] * back.real[i] + probe.imag[i] * back.imag[i];
  }
  CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("band partition boundaries and reassembly") {
  BandPartition p{{32, 32, 64, 128, 257}};
  CHECK(p.boundaries() == std::vector<std::size_t>{0, 32, 64, 128, 256, 513});
  auto x = white_noise(8000, 7);
  auto spec = stft<double>(x, StftConfig{});
  auto parts = band_partition(spec, p);
  CHECK(parts.size() == 5);
  CHECK(parts[4].bins() == 257);
  CHECK(band_merge(parts) == spec);

  auto single = band_partition(spec, BandPartition{{513}});
  CHECK(single.size() == 1);
  CHECK(single[0] == spec);
  CHECK_THROWS_AS(band_partition(spec, BandPartition{{32, 32}}), ConfigError);
  BandPartition empty_group{{0, 513}};
  CHECK_THROWS_AS(empty_group.validate(513), ConfigError);
}

TEST_CASE("three channel features") {
  Spectrogram<double> spec(3, 2, StftConfig{4, 2, 16000});
  spec.real.at({1, 1}) = 3.0;
  spec.imag.at({1, 1}) = 4.0;
  auto f = features_3ch(spec);
  CHECK(f.shape() == Shape{3, 3, 2});
  CHECK(f.at({0, 1, 1}) == 5.0);
  CHECK(f.at({1, 1, 1}) == 3.0);
  CHECK(f.at({2, 1, 1}) == 4.0);
  CHECK(f.at({0, 0, 0}) == 0.0);

  auto x = white_noise(3000, 8);
  auto g = features_3ch(stft<double>(x, StftConfig{}));
  const std::size_t n = g.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(g[i] - std::hypot(g[n + i], g[2 * n + i])) < 1e-12);
  }
}

}  // namespace
}  // namespace dronese
