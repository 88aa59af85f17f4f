// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "dronese/data/manifest.h"
#include "dronese/metrics/evaluate.h"
#include "dronese/metrics/stoi.h"
#include "dronese/model/network.h"
#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

// Voiced-like test signal: harmonic stack with a drifting pitch under
// syllables of random length and level separated by short pauses.
std::vector<double> babble(std::size_t n, double rate, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> env(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    const auto len = static_cast<std::size_t>(rate * (0.12 + 0.2 * u(rng)));
    const double level = 0.3 + 0.7 * u(rng);
    for (std::size_t k = 0; k < len && i + k < n; ++k) {
      env[i + k] = level * std::sin(std::numbers::pi * double(k) / double(len));
    }
    i += len + static_cast<std::size_t>(rate * 0.05 * u(rng));
  }
  const double f0 = 110.0 + 60.0 * u(rng);
  std::vector<double> x(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / rate;
    phase += 2 * std::numbers::pi * f0 * (1.0 + 0.1 * std::sin(2 * std::numbers::pi * 0.7 * t)) / rate;
    double s = 0.0;
    for (int h = 1; h <= 20; ++h) s += std::sin(h * phase) / h;
    x[i] = env[i] * s;
  }
  return x;
}

std::vector<double> white(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

double power(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p += v * v;
  return p / double(x.size());
}

TEST_CASE("resample_poly preserves an in-band tone and its phase") {
  const std::size_t n = 16000;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * 1000.0 * double(i) / 16000.0);
  const auto y = resample_poly(x, 10000, 16000);
  CHECK(y.size() == 10000);
  double worst = 0.0;
  for (std::size_t m = 200; m + 200 < y.size(); ++m) {
    const double want = std::sin(2 * std::numbers::pi * 1000.0 * double(m) / 10000.0);
    worst = std::max(worst, std::abs(y[m] - want));
  }
  CHECK(worst < 2e-3);
}

TEST_CASE("resample_poly rejects a tone above the new Nyquist") {
  const std::size_t n = 16000;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * 7000.0 * double(i) / 16000.0);
  const auto y = resample_poly(x, 5, 8);
  std::vector<double> mid(y.begin() + 200, y.end() - 200);
  CHECK(power(mid) < 1e-4 * 0.5);
}

TEST_CASE("stoi of a clean signal against itself is one") {
  const auto x = babble(48000, 16000, 1);
  CHECK(stoi(x, x, 16000) > 0.999);
}

TEST_CASE("stoi of independent noise is near zero") {
  double sum = 0.0;
  for (unsigned seed = 0; seed < 8; ++seed) {
    sum += stoi(white(40000, 200 + seed), white(40000, 300 + seed), 16000);
  }
  CHECK(std::abs(sum / 8) < 0.2);
}

TEST_CASE("stoi ranks independent noise below a -15 dB mixture") {
  // Against a strongly modulated reference the clipping step lets even
  // unrelated noise correlate, so only the ordering is asserted here.
  const auto x = babble(48000, 16000, 9);
  const auto n = white(x.size(), 10);
  const double g = std::sqrt(power(x) / (power(n) * std::pow(10.0, 1.5)));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + g * n[i];
  CHECK(stoi(white(x.size(), 11), x, 16000) < stoi(y, x, 16000));
}

TEST_CASE("stoi matches a reference implementation on a closed-form pair") {
  // Reference value from the pystoi package (Octave-compatible resampler);
  // the tolerance absorbs the different anti-aliasing filter.
  const std::size_t n = 40000;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / 16000.0;
    const double env = std::pow(std::sin(std::numbers::pi * 3 * t), 2) + 0.05;
    double s = 0.0;
    for (int h = 1; h <= 20; ++h) s += std::sin(2 * std::numbers::pi * 140 * h * t) / h;
    x[i] = env * s;
    y[i] = x[i] + 0.4 * std::sin(2 * std::numbers::pi * (300 * t + 900 * t * t));
  }
  CHECK(stoi(y, x, 16000) == doctest::Approx(0.8841480218447204).epsilon(0.01));
}

TEST_CASE("stoi orders noise levels") {
  const auto x = babble(48000, 16000, 4);
  const auto n = white(x.size(), 5);
  const double px = power(x), pn = power(n);
  auto mix_at = [&](double snr_db) {
    const double g = std::sqrt(px / (pn * std::pow(10.0, snr_db / 10.0)));
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + g * n[i];
    return y;
  };
  const double s_low = stoi(mix_at(-15), x, 16000);
  const double s_mid = stoi(mix_at(0), x, 16000);
  const double s_high = stoi(mix_at(15), x, 16000);
  CHECK(s_low < s_mid);
  CHECK(s_mid < s_high);
  CHECK(s_high < 0.999);
}

TEST_CASE("stoi is invariant to the gain of the estimate") {
  const auto x = babble(40000, 16000, 6);
  const auto n = white(x.size(), 7);
  std::vector<double> y(x.size()), y3(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] + 0.3 * n[i];
    y3[i] = 3.0 * y[i];
  }
  CHECK(std::abs(stoi(y, x, 16000) - stoi(y3, x, 16000)) < 1e-9);
}

TEST_CASE("stoi rejects short or mismatched input") {
  const auto x = babble(4000, 16000, 8);
  CHECK_THROWS_AS(stoi(x, x, 16000), DataError);
  const auto y = babble(48000, 16000, 8);
  std::vector<double> z(y.begin(), y.end() - 1);
  CHECK_THROWS_AS(stoi(z, y, 16000), ShapeError);
}

TEST_CASE("si_sdr_metric endpoints and the orthogonal case") {
  const auto x = white(4096, 20);
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  CHECK(si_sdr_metric(x, x) == 100.0);
  CHECK(si_sdr_metric(neg, x) == 100.0);
  // Exactly orthogonal noise at one tenth of the amplitude: 20 dB.
  std::vector<double> s(1024), n(1024), y(1024);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = (i % 2 == 0) ? 1.0 : -1.0;
    n[i] = ((i / 2) % 2 == 0) ? 0.1 : -0.1;
    y[i] = s[i] + n[i];
  }
  CHECK(std::abs(si_sdr_metric(y, s) - 20.0) < 1e-6);
  const double base = si_sdr_metric(y, s);
  for (double a : {0.01, 0.5, 3.0, 1000.0}) {
    std::vector<double> ya(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ya[i] = a * y[i];
    CHECK(std::abs(si_sdr_metric(ya, s) - base) < 1e-10);
  }
}

TEST_CASE("lsd_metric endpoints") {
  const auto x = babble(16000, 16000, 21);
  CHECK(lsd_metric(x, x, 16000) == 0.0);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 10.0 * x[i];
  // Frames that are entirely below the log floor in both signals are zero
  // in both, so the mean sits at or below 20 dB.
  const double d = lsd_metric(y, x, 16000);
  CHECK(d <= 20.0 + 1e-9);
  CHECK(d > 15.0);
}

MixtureManifest small_manifest() {
  ManifestSpec spec;
  for (int i = 0; i < 6; ++i) spec.clean_sources.push_back("speech:seed=" + std::to_string(i));
  spec.noise_sources = {"drone"};
  spec.duration_s = 1.0;
  spec.plans = {{Split::kTest, {-5, -15, -25}, 2}};
  spec.seed = 3;
  return build_manifest(spec);
}

TEST_CASE("evaluate_set with an identity enhancer reproduces the input row") {
  const auto m = small_manifest();
  const auto rep = evaluate_set(m, [](const std::vector<double>& x) { return x; });
  REQUIRE(rep.per_snr.size() == 3);
  for (const auto& r : rep.per_snr) {
    CHECK(r.count == 2);
    CHECK(r.enhanced.si_sdr_db == r.input.si_sdr_db);
    CHECK(r.enhanced.stoi == r.input.stoi);
    CHECK(r.enhanced.lsd_db == r.input.lsd_db);
  }
  CHECK(rep.per_snr[0].snr_db == -25.0);
  CHECK(rep.per_snr[0].input.si_sdr_db < rep.per_snr[2].input.si_sdr_db);
  CHECK(rep.per_snr[0].input.stoi < rep.per_snr[2].input.stoi);
  CHECK(rep.to_tsv().find("# columns=1") == 0);
  CHECK(rep.to_json().find("\"omitted_metrics\"") != std::string::npos);
}

TEST_CASE("per-SNR means recombine to the global mean") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<EntryScore> scores;
  const double snrs[] = {-5, -10, -25};
  for (int i = 0; i < 37; ++i) {
    EntryScore s;
    s.id = "e" + std::to_string(1000 + i);
    s.snr_db = snrs[i % 3 == 0 ? 0 : (i % 5 == 0 ? 2 : 1)];
    s.input = {10 * u(rng), 0.5 + 0.4 * u(rng), 5 + u(rng)};
    s.enhanced = {10 * u(rng), 0.5 + 0.4 * u(rng), 5 + u(rng)};
    scores.push_back(s);
  }
  const auto rep = aggregate(scores);
  double sisdr = 0.0, stoi_sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rep.per_snr) {
    sisdr += double(r.count) * r.enhanced.si_sdr_db;
    stoi_sum += double(r.count) * r.input.stoi;
    n += r.count;
  }
  CHECK(n == 37);
  CHECK(std::abs(sisdr / double(n) - rep.mean.enhanced.si_sdr_db) < 1e-12);
  CHECK(std::abs(stoi_sum / double(n) - rep.mean.input.stoi) < 1e-12);
  // Order of entries does not matter.
  std::reverse(scores.begin(), scores.end());
  const auto rev = aggregate(scores);
  CHECK(rev.mean.enhanced.si_sdr_db == rep.mean.enhanced.si_sdr_db);
  CHECK(rev.per_snr[1].input.lsd_db == rep.per_snr[1].input.lsd_db);
}

TEST_CASE("evaluate_set runs a model end to end") {
  const auto m = small_manifest();
  const auto model = build_model(ModelConfig::tiny(), 1);
  const auto rep = evaluate_set(m, model);
  CHECK(rep.mean.count == 6);
  CHECK(std::isfinite(rep.mean.enhanced.si_sdr_db));
  CHECK(rep.mean.enhanced.stoi >= -1.0);
  CHECK(rep.mean.enhanced.stoi <= 1.0);
}

}  // namespace
}  // namespace dronese
