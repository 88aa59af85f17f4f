// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/data/mixing.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "dronese/numerics/errors.h"

namespace dronese {

double signal_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  long double acc = 0.0L;
  for (double v : x) acc += static_cast<long double>(v) * v;
  return static_cast<double>(acc / static_cast<long double>(x.size()));
}

Mixture mix_at_snr(std::span<const double> clean, std::span<const double> noise,
                   double snr_db) {
  if (clean.size() != noise.size()) {
    throw ShapeError("mix_at_snr: clean has " + std::to_string(clean.size()) +
                     " samples, noise " + std::to_string(noise.size()));
  }
  if (!std::isfinite(snr_db)) throw ConfigError("mix_at_snr: snr must be finite");
  const double pc = signal_power(clean), pn = signal_power(noise);
  if (!(pc > 0.0)) throw DataError("mix_at_snr: clean signal has zero energy");
  if (!(pn > 0.0)) throw DataError("mix_at_snr: noise signal has zero energy");
  Mixture m;
  m.gain = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  m.mixture.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    m.mixture[i] = clean[i] + m.gain * noise[i];
  }
  return m;
}

std::size_t segment_count(std::size_t len, std::size_t seg_len, std::size_t stride) {
  if (seg_len == 0 || stride == 0) {
    throw ConfigError("segment_long_noise: seg_len and stride must be positive");
  }
  if (seg_len > len) return 0;
  return (len - seg_len) / stride + 1;
}

std::vector<std::vector<double>> segment_long_noise(std::span<const double> wave,
                                                    std::size_t seg_len,
                                                    std::size_t stride) {
  const std::size_t n = segment_count(wave.size(), seg_len, stride);
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto first = wave.begin() + static_cast<std::ptrdiff_t>(s * stride);
    out.emplace_back(first, first + static_cast<std::ptrdiff_t>(seg_len));
  }
  return out;
}

std::vector<double> fit_length(std::span<const double> x, std::size_t len) {
  std::vector<double> out(len, 0.0);
  const std::size_t n = std::min(len, x.size());
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n), out.begin());
  return out;
}

}  // namespace dronese
