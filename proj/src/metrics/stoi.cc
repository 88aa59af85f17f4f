// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/metrics/stoi.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "dronese/numerics/errors.h"
#include "dronese/numerics/fft.h"

namespace dronese {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kKaiserBeta = 5.0;

// Zeroth-order modified Bessel function of the first kind (power series).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (double(k) * double(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Hann of length n + 2 with the two zero end points dropped.
std::vector<double> inner_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i + 1) /
                                double(n + 1));
  }
  return w;
}

std::vector<double> remove_silent_frames(std::span<const double> ref,
                                         std::span<const double> est,
                                         const StoiParams& p,
                                         std::vector<double>* est_out) {
  const std::size_t len = p.frame, hop = p.hop;
  const auto w = inner_hann(len);
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + len < ref.size(); i += hop) starts.push_back(i);
  std::vector<double> energy(starts.size());
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double e = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double v = w[k] * ref[starts[f] + k];
      e += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(e) + kEps);
  }
  const double peak =
      energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (peak - p.dynamic_range_db - energy[f] < 0.0) kept.push_back(starts[f]);
  }
  const std::size_t segments = (len + hop - 1) / hop;
  const std::size_t out_len =
      kept.empty() ? 0 : (kept.size() + segments - 1) * hop;
  std::vector<double> ref_out(out_len, 0.0);
  est_out->assign(out_len, 0.0);
  for (std::size_t f = 0; f < kept.size(); ++f) {
    for (std::size_t k = 0; k < len; ++k) {
      ref_out[f * hop + k] += w[k] * ref[kept[f] + k];
      (*est_out)[f * hop + k] += w[k] * est[kept[f] + k];
    }
  }
  return ref_out;
}

// [bands][frames] third-octave band envelopes.
std::vector<std::vector<double>> band_envelopes(std::span<const double> x,
                                                const StoiParams& p) {
  const auto w = inner_hann(p.frame);
  const std::size_t bins = p.fft_size / 2 + 1;
  std::vector<double> freqs(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    freqs[k] = p.analysis_rate * double(k) / double(p.fft_size);
  }
  auto nearest_bin = [&](double hz) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < bins; ++k) {
      if (std::abs(freqs[k] - hz) < std::abs(freqs[best] - hz)) best = k;
    }
    return best;
  };
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t b = 0; b < p.bands; ++b) {
    const double lo = p.min_freq * std::pow(2.0, (2.0 * double(b) - 1.0) / 6.0);
    const double hi = p.min_freq * std::pow(2.0, (2.0 * double(b) + 1.0) / 6.0);
    ranges.push_back({nearest_bin(lo), nearest_bin(hi)});
  }
  std::vector<std::vector<double>> env(p.bands);
  const auto& plan = fft_plan<double>(p.fft_size);
  std::vector<double> buf(p.fft_size);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t i = 0; i + p.frame < x.size(); i += p.hop) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t k = 0; k < p.frame; ++k) buf[k] = w[k] * x[i + k];
    plan.forward(buf, spec);
    for (std::size_t b = 0; b < p.bands; ++b) {
      double e = 0.0;
      for (std::size_t k = ranges[b].first; k < ranges[b].second; ++k) {
        e += std::norm(spec[k]);
      }
      env[b].push_back(std::sqrt(e));
    }
  }
  return env;
}

}  // namespace

std::vector<double> resample_poly(std::span<const double> x, std::size_t up,
                                  std::size_t down) {
  if (up == 0 || down == 0) throw ConfigError("resample_poly: zero rate factor");
  const std::size_t g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return {x.begin(), x.end()};
  const std::size_t half = 10 * std::max(up, down);
  const std::size_t taps = 2 * half + 1;
  const double cutoff = 1.0 / double(std::max(up, down));
  std::vector<double> h(taps);
  const double i0_beta = bessel_i0(kKaiserBeta);
  for (std::size_t i = 0; i < taps; ++i) {
    const double n = double(i) - double(half);
    const double arg = std::numbers::pi * cutoff * n;
    const double sinc = n == 0.0 ? 1.0 : std::sin(arg) / arg;
    const double r = n / double(half);
    const double kaiser = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    h[i] = cutoff * sinc * kaiser * double(up);
  }
  const std::size_t out_len = (x.size() * up + down - 1) / down;
  std::vector<double> y(out_len, 0.0);
  for (std::size_t m = 0; m < out_len; ++m) {
    // Upsampled-domain position of output m is m * down; input sample j sits
    // at j * up; filter index = half + m * down - j * up.
    const long long center = static_cast<long long>(m * down);
    long long j_lo = (center - static_cast<long long>(half) + static_cast<long long>(up) - 1) /
                     static_cast<long long>(up);
    if (center - static_cast<long long>(half) < 0) j_lo = 0;
    const long long j_hi = std::min<long long>(
        static_cast<long long>(x.size()) - 1,
        (center + static_cast<long long>(half)) / static_cast<long long>(up));
    double acc = 0.0;
    for (long long j = std::max<long long>(j_lo, 0); j <= j_hi; ++j) {
      const long long k = static_cast<long long>(half) + center - j * static_cast<long long>(up);
      acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(j)];
    }
    y[m] = acc;
  }
  return y;
}

double stoi(std::span<const double> est, std::span<const double> ref,
            double sample_rate, const StoiParams& p) {
  if (est.size() != ref.size()) {
    throw ShapeError("stoi: estimate has " + std::to_string(est.size()) +
                     " samples, reference " + std::to_string(ref.size()));
  }
  std::vector<double> x(ref.begin(), ref.end()), y(est.begin(), est.end());
  if (sample_rate != p.analysis_rate) {
    const auto a = static_cast<std::size_t>(std::llround(p.analysis_rate));
    const auto b = static_cast<std::size_t>(std::llround(sample_rate));
    x = resample_poly(x, a, b);
    y = resample_poly(y, a, b);
  }
  std::vector<double> y_sil;
  const auto x_sil = remove_silent_frames(x, y, p, &y_sil);
  const auto xe = band_envelopes(x_sil, p);
  const auto ye = band_envelopes(y_sil, p);
  const std::size_t frames = xe.empty() ? 0 : xe[0].size();
  if (frames < p.segment) {
    const double min_ms = 1000.0 * double((p.segment + 1) * p.hop) / p.analysis_rate;
    throw DataError("stoi: only " + std::to_string(frames) +
                    " non-silent frames; at least " + std::to_string(p.segment) +
                    " (about " + std::to_string(static_cast<int>(min_ms)) +
                    " ms of active speech) are required");
  }
  const double clip = std::pow(10.0, -p.clip_db / 20.0);
  const std::size_t N = p.segment;
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(N), ys(N);
  for (std::size_t m = N; m <= frames; ++m) {
    for (std::size_t b = 0; b < p.bands; ++b) {
      double xn = 0.0, yn = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        xs[i] = xe[b][m - N + i];
        ys[i] = ye[b][m - N + i];
        xn += xs[i] * xs[i];
        yn += ys[i] * ys[i];
      }
      const double norm = std::sqrt(xn) / (std::sqrt(yn) + kEps);
      double xm = 0.0, ym = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        ys[i] = std::min(ys[i] * norm, xs[i] * (1.0 + clip));
        xm += xs[i];
        ym += ys[i];
      }
      xm /= double(N);
      ym /= double(N);
      double xx = 0.0, yy = 0.0, xy = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double a = xs[i] - xm, c = ys[i] - ym;
        xx += a * a;
        yy += c * c;
        xy += a * c;
      }
      total += xy / ((std::sqrt(xx) + kEps) * (std::sqrt(yy) + kEps));
      ++count;
    }
  }
  return total / double(count);
}

}  // namespace dronese
