// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/data/synth.h"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// "prefix:k=v,k=v" -> map. Throws ConfigError on a wrong prefix or a
// malformed pair.
std::map<std::string, std::string> split_inline(const std::string& text,
                                                const std::string& prefix) {
  if (text.rfind(prefix + ":", 0) != 0 && text != prefix) {
    throw ConfigError("expected '" + prefix + ":key=value,...', got '" + text + "'");
  }
  std::map<std::string, std::string> out;
  if (text == prefix) return out;
  std::stringstream ss(text.substr(prefix.size() + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(prefix + ": malformed item '" + item + "'");
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void normalize_rms(std::vector<double>& x, double target) {
  long double acc = 0.0L;
  for (double v : x) acc += static_cast<long double>(v) * v;
  if (x.empty() || acc == 0.0L) return;
  const double g = target / std::sqrt(static_cast<double>(acc / x.size()));
  for (double& v : x) v *= g;
}

std::size_t sample_count(double duration_s, double rate) {
  if (!(duration_s > 0.0) || !(rate > 0.0)) {
    throw ConfigError("synthesis needs positive duration and sample rate");
  }
  return static_cast<std::size_t>(std::llround(duration_s * rate));
}

}  // namespace

void DroneNoiseSpec::validate() const {
  if (!(blade_pass_hz > 0.0) || !std::isfinite(blade_pass_hz)) {
    throw ConfigError("drone: blade_pass_hz must be positive");
  }
  if (n_harmonics < 1) throw ConfigError("drone: n_harmonics must be at least 1");
  if (!std::isfinite(harmonic_decay_db_per_octave) || !std::isfinite(am_depth) ||
      !std::isfinite(am_rate_hz) || std::isnan(broadband_level_db) ||
      broadband_level_db == std::numeric_limits<double>::infinity()) {
    throw ConfigError("drone: levels must be finite (broadband may be -inf)");
  }
  if (am_depth < 0.0 || am_depth >= 1.0) throw ConfigError("drone: am_depth must be in [0, 1)");
  if (broadband_pole < 0.0 || broadband_pole >= 1.0) {
    throw ConfigError("drone: broadband_pole must be in [0, 1)");
  }
}

std::string DroneNoiseSpec::to_string() const {
  return "drone:bp=" + fmt(blade_pass_hz) + ",h=" + std::to_string(n_harmonics) +
         ",decay=" + fmt(harmonic_decay_db_per_octave) + ",bb=" + fmt(broadband_level_db) +
         ",pole=" + fmt(broadband_pole) + ",am=" + fmt(am_depth) +
         ",am_hz=" + fmt(am_rate_hz) + ",seed=" + std::to_string(seed);
}

DroneNoiseSpec DroneNoiseSpec::parse(const std::string& text) {
  DroneNoiseSpec s;
  for (const auto& [k, v] : split_inline(text, "drone")) {
    if (k == "bp") s.blade_pass_hz = to_double(k, v);
    else if (k == "h") s.n_harmonics = to_u64(k, v);
    else if (k == "decay") s.harmonic_decay_db_per_octave = to_double(k, v);
    else if (k == "bb") s.broadband_level_db = to_double(k, v);
    else if (k == "pole") s.broadband_pole = to_double(k, v);
    else if (k == "am") s.am_depth = to_double(k, v);
    else if (k == "am_hz") s.am_rate_hz = to_double(k, v);
    else if (k == "seed") s.seed = to_u64(k, v);
    else throw ConfigError("drone: unknown key '" + k + "'");
  }
  s.validate();
  return s;
}

std::vector<double> synth_drone_noise(const DroneNoiseSpec& spec, double duration_s,
                                      double sample_rate) {
  spec.validate();
  const std::size_t n = sample_count(duration_s, sample_rate);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> harm(n, 0.0);
  for (std::size_t k = 1; k <= spec.n_harmonics; ++k) {
    const double f = double(k) * spec.blade_pass_hz;
    const double phi = phase(rng);
    if (f >= sample_rate / 2) continue;
    const double amp = std::pow(10.0, -spec.harmonic_decay_db_per_octave *
                                          std::log2(double(k)) / 20.0);
    const double w = kTwoPi * f / sample_rate;
    for (std::size_t i = 0; i < n; ++i) harm[i] += amp * std::sin(w * double(i) + phi);
  }
  std::vector<double> out = harm;
  if (std::isfinite(spec.broadband_level_db)) {
    std::vector<double> bed(n);
    double state = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      state = spec.broadband_pole * state + (1.0 - spec.broadband_pole) * gauss(rng);
      bed[i] = state;
    }
    long double ph = 0.0L, pb = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      ph += static_cast<long double>(harm[i]) * harm[i];
      pb += static_cast<long double>(bed[i]) * bed[i];
    }
    if (pb > 0.0L) {
      const double g = std::sqrt(static_cast<double>(ph / pb)) *
                       std::pow(10.0, spec.broadband_level_db / 20.0);
      for (std::size_t i = 0; i < n; ++i) out[i] += g * bed[i];
    }
  }
  if (spec.am_depth > 0.0) {
    const double phi = phase(rng);
    const double w = kTwoPi * spec.am_rate_hz / sample_rate;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] *= 1.0 + spec.am_depth * std::sin(w * double(i) + phi);
    }
  }
  normalize_rms(out, 1.0);
  return out;
}

void SpeechSpec::validate() const {
  if (!(f0_min > 0.0) || !(f0_max >= f0_min) || !std::isfinite(f0_max)) {
    throw ConfigError("speech: need 0 < f0_min <= f0_max");
  }
  if (!(rms > 0.0) || !std::isfinite(rms)) throw ConfigError("speech: rms must be positive");
}

std::string SpeechSpec::to_string() const {
  return "speech:f0_min=" + fmt(f0_min) + ",f0_max=" + fmt(f0_max) + ",rms=" + fmt(rms) +
         ",seed=" + std::to_string(seed);
}

SpeechSpec SpeechSpec::parse(const std::string& text) {
  SpeechSpec s;
  for (const auto& [k, v] : split_inline(text, "speech")) {
    if (k == "f0_min") s.f0_min = to_double(k, v);
    else if (k == "f0_max") s.f0_max = to_double(k, v);
    else if (k == "rms") s.rms = to_double(k, v);
    else if (k == "seed") s.seed = to_u64(k, v);
    else throw ConfigError("speech: unknown key '" + k + "'");
  }
  s.validate();
  return s;
}

std::vector<double> synth_speech(const SpeechSpec& spec, double duration_s,
                                 double sample_rate) {
  spec.validate();
  const std::size_t n = sample_count(duration_s, sample_rate);
  // First three formants of a handful of vowels.
  static constexpr std::array<std::array<double, 3>, 6> kVowels = {{
      {730, 1090, 2440}, {270, 2290, 3010}, {300, 870, 2240},
      {530, 1840, 2480}, {570, 840, 2410}, {660, 1720, 2410},
  }};
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double f0 = spec.f0_min + (spec.f0_max - spec.f0_min) * u(rng);

  std::vector<double> x(n, 0.0);
  std::size_t i = 0;
  double phase = 0.0;
  while (i < n) {
    const std::size_t len = std::min<std::size_t>(
        static_cast<std::size_t>(sample_rate * (0.1 + 0.18 * u(rng))), n - i);
    const auto& formants = kVowels[static_cast<std::size_t>(u(rng) * kVowels.size()) %
                                   kVowels.size()];
    const double glide = 0.15 * (u(rng) - 0.5);
    const double level = 0.3 + 0.7 * u(rng);
    std::vector<double> amp;
    for (std::size_t h = 1; double(h) * f0 < sample_rate / 2 - 200.0 && h < 40; ++h) {
      const double fh = double(h) * f0;
      double a = 0.02;
      for (double fk : formants) {
        const double d = (fh - fk) / (60.0 + 0.05 * fk);
        a += 1.0 / (1.0 + d * d);
      }
      amp.push_back(a / std::sqrt(double(h)));
    }
    double seg_power = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double t = double(k) / sample_rate;
      const double frac = len > 1 ? double(k) / double(len - 1) : 0.0;
      const double inst = f0 * (1.0 + 0.08 * std::sin(kTwoPi * 3.0 * t)) * (1.0 + glide * frac);
      phase += kTwoPi * inst / sample_rate;
      double s = 0.0;
      for (std::size_t h = 0; h < amp.size(); ++h) s += amp[h] * std::sin(double(h + 1) * phase);
      const double env = std::pow(std::sin(std::numbers::pi * double(k) / double(len)), 0.7);
      x[i + k] = level * env * s;
      seg_power += x[i + k] * x[i + k];
    }
    i += len;
    if (i < n && u(rng) < 0.4) {
      const std::size_t clen = std::min<std::size_t>(
          static_cast<std::size_t>(sample_rate * (0.04 + 0.06 * u(rng))), n - i);
      const double g = 0.3 * std::sqrt(seg_power / double(std::max<std::size_t>(len, 1)));
      double prev = 0.0;
      for (std::size_t k = 0; k < clen; ++k) {
        const double w = gauss(rng);
        const double hann = 0.5 - 0.5 * std::cos(kTwoPi * double(k) / double(clen));
        x[i + k] += g * (w - prev) * hann;
        prev = w;
      }
      i += clen;
    }
    i += static_cast<std::size_t>(sample_rate * 0.06 * u(rng));
  }
  normalize_rms(x, spec.rms);
  return x;
}

}  // namespace dronese
