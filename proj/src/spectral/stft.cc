// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/spectral/stft.h"

#include <cmath>
#include <numbers>
#include <string>

#include "dronese/numerics/errors.h"
#include "dronese/numerics/fft.h"

namespace dronese {

void StftConfig::validate() const {
  if (!is_power_of_two(fft_size) || fft_size < 2) {
    throw ConfigError("fft_size must be a power of two, got " +
                      std::to_string(fft_size));
  }
  if (hop == 0 || hop > fft_size) {
    throw ConfigError("hop must be in [1, fft_size], got " + std::to_string(hop));
  }
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
}

template <typename T>
Tensor<T> Spectrogram<T>::magnitude() const {
  Tensor<T> mag(real.shape());
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::sqrt(real[i] * real[i] + imag[i] * imag[i]);
  }
  return mag;
}

template <typename T>
std::vector<T> hann_window(std::size_t n) {
  std::vector<T> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = static_cast<T>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n)));
  }
  return w;
}

std::size_t reflect_index(long long i, std::size_t len) {
  if (len == 1) return 0;
  const long long period = 2 * (static_cast<long long>(len) - 1);
  long long j = i % period;
  if (j < 0) j += period;
  if (j >= static_cast<long long>(len)) j = period - j;
  return static_cast<std::size_t>(j);
}

template <typename T>
void analyze_frame(std::span<const T> frame, std::span<const T> window,
                   std::span<std::complex<T>> out) {
  std::vector<T> buf(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i] * window[i];
  fft_plan<T>(frame.size()).forward(buf, out);
}

template <typename T>
Spectrogram<T> stft(std::span<const T> wave, const StftConfig& config) {
  config.validate();
  if (wave.empty()) throw DataError("stft: empty input signal");
  const std::size_t n = config.fft_size, F = config.bins();
  const std::size_t frames = config.frames(wave.size());
  const long long pad = static_cast<long long>(n / 2);
  const auto window = hann_window<T>(n);
  Spectrogram<T> spec(F, frames, config);
  std::vector<T> frame(n);
  std::vector<std::complex<T>> bins(F);
  for (std::size_t t = 0; t < frames; ++t) {
    const long long start = static_cast<long long>(t * config.hop) - pad;
    for (std::size_t m = 0; m < n; ++m) {
      frame[m] = wave[reflect_index(start + static_cast<long long>(m),
                                    wave.size())];
    }
    analyze_frame<T>(frame, window, bins);
    for (std::size_t f = 0; f < F; ++f) {
      spec.real[f * frames + t] = bins[f].real();
      spec.imag[f * frames + t] = bins[f].imag();
    }
  }
  return spec;
}

template <typename T>
std::vector<T> istft_normalizer(const StftConfig& config, std::size_t frames,
                                std::size_t out_len) {
  const std::size_t n = config.fft_size, pad = n / 2;
  const auto window = hann_window<T>(n);
  std::vector<T> norm(out_len, T(0));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t p = t * config.hop + m;
      if (p < pad || p - pad >= out_len) continue;
      norm[p - pad] += window[m] * window[m];
    }
  }
  for (std::size_t i = 0; i < out_len; ++i) {
    if (!(norm[i] > T(1e-10))) {
      throw ConfigError("istft: sample " + std::to_string(i) +
                        " is not covered by any frame");
    }
  }
  return norm;
}

namespace {

template <typename T>
void check_metadata(const Spectrogram<T>& spec) {
  spec.config.validate();
  if (spec.real.rank() != 2 || spec.real.shape() != spec.imag.shape()) {
    throw ShapeError("spectrogram planes must be matching [F, T], got " +
                     shape_string(spec.real.shape()) + " and " +
                     shape_string(spec.imag.shape()));
  }
  if (spec.bins() != spec.config.bins()) {
    throw ConfigError("spectrogram has " + std::to_string(spec.bins()) +
                      " bins but fft_size " +
                      std::to_string(spec.config.fft_size) + " implies " +
                      std::to_string(spec.config.bins()));
  }
}

}  // namespace

template <typename T>
std::vector<T> istft(const Spectrogram<T>& spec, std::size_t out_len) {
  check_metadata(spec);
  const std::size_t n = spec.config.fft_size, pad = n / 2, F = spec.bins();
  const std::size_t frames = spec.frames();
  const auto window = hann_window<T>(n);
  const auto norm = istft_normalizer<T>(spec.config, frames, out_len);
  std::vector<T> out(out_len, T(0));
  std::vector<std::complex<T>> bins(F);
  std::vector<T> frame(n);
  const auto& plan = fft_plan<T>(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t first = t * spec.config.hop;
    if (first >= out_len + pad) break;
    for (std::size_t f = 0; f < F; ++f) {
      bins[f] = {spec.real[f * frames + t], spec.imag[f * frames + t]};
    }
    plan.inverse(bins, frame);
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t p = first + m;
      if (p < pad || p - pad >= out_len) continue;
      out[p - pad] += window[m] * frame[m];
    }
  }
  for (std::size_t i = 0; i < out_len; ++i) out[i] /= norm[i];
  return out;
}

template <typename T>
Spectrogram<T> istft_backward(const Spectrogram<T>& spec,
                              std::span<const T> grad_wave) {
  check_metadata(spec);
  const std::size_t n = spec.config.fft_size, pad = n / 2, F = spec.bins();
  const std::size_t frames = spec.frames(), out_len = grad_wave.size();
  const auto window = hann_window<T>(n);
  const auto norm = istft_normalizer<T>(spec.config, frames, out_len);
  Spectrogram<T> grad(F, frames, spec.config);
  std::vector<T> g(n);
  std::vector<std::complex<T>> bins(F);
  const auto& plan = fft_plan<T>(n);
  const T inv_n = T(1) / static_cast<T>(n);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t p = t * spec.config.hop + m;
      g[m] = (p < pad || p - pad >= out_len)
                 ? T(0)
                 : window[m] * grad_wave[p - pad] / norm[p - pad];
    }
    plan.forward(g, bins);
    for (std::size_t f = 0; f < F; ++f) {
      const bool edge = f == 0 || f == n / 2;
      const T c = (edge ? T(1) : T(2)) * inv_n;
      grad.real[f * frames + t] = c * bins[f].real();
      grad.imag[f * frames + t] = edge ? T(0) : c * bins[f].imag();
    }
  }
  return grad;
}

#define DRONESE_INSTANTIATE(T)                                               \
  template struct Spectrogram<T>;                                            \
  template std::vector<T> hann_window<T>(std::size_t);                       \
  template void analyze_frame<T>(std::span<const T>, std::span<const T>,     \
                                 std::span<std::complex<T>>);                \
  template Spectrogram<T> stft<T>(std::span<const T>, const StftConfig&);    \
  template std::vector<T> istft<T>(const Spectrogram<T>&, std::size_t);      \
  template Spectrogram<T> istft_backward<T>(const Spectrogram<T>&,           \
                                            std::span<const T>);             \
  template std::vector<T> istft_normalizer<T>(const StftConfig&, std::size_t, \
                                              std::size_t);

DRONESE_INSTANTIATE(float)
DRONESE_INSTANTIATE(double)

}  // namespace dronese
