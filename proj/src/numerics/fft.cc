// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/numerics/fft.h"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "dronese/numerics/errors.h"

namespace dronese {

bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

template <typename T>
RealFft<T>::RealFft(std::size_t n) : n_(n) {
  if (n < 2 || !is_power_of_two(n)) {
    throw ConfigError("fft size must be a power of two >= 2, got " +
                      std::to_string(n));
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  bitrev_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  twiddle_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    // Twiddles in double regardless of T.
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) /
                     static_cast<double>(n);
    twiddle_[k] = {static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a))};
  }
}

template <typename T>
void RealFft<T>::transform(std::vector<std::complex<T>>& a, bool inverse) const {
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2, step = n_ / len;
    for (std::size_t i = 0; i < n_; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        std::complex<T> w = twiddle_[j * step];
        if (inverse) w = std::conj(w);
        const std::complex<T> u = a[i + j];
        const std::complex<T> v = a[i + j + half] * w;
        a[i + j] = u + v;
        a[i + j + half] = u - v;
      }
    }
  }
}

template <typename T>
void RealFft<T>::forward(std::span<const T> in,
                         std::span<std::complex<T>> out) const {
  if (in.size() != n_ || out.size() != bins()) {
    throw ConfigError("rfft: expected " + std::to_string(n_) + " samples");
  }
  std::vector<std::complex<T>> a(n_);
  for (std::size_t i = 0; i < n_; ++i) a[i] = {in[i], T(0)};
  transform(a, false);
  for (std::size_t k = 0; k < bins(); ++k) out[k] = a[k];
}

template <typename T>
void RealFft<T>::inverse(std::span<const std::complex<T>> in,
                         std::span<T> out) const {
  if (in.size() != bins() || out.size() != n_) {
    throw ConfigError("irfft: expected " + std::to_string(bins()) + " bins");
  }
  std::vector<std::complex<T>> a(n_);
  a[0] = {in[0].real(), T(0)};
  a[n_ / 2] = {in[n_ / 2].real(), T(0)};
  for (std::size_t k = 1; k < n_ / 2; ++k) {
    a[k] = in[k];
    a[n_ - k] = std::conj(in[k]);
  }
  transform(a, true);
  const T scale = T(1) / static_cast<T>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = a[i].real() * scale;
}

template <typename T>
const RealFft<T>& fft_plan(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<RealFft<T>>> plans;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = plans[n];
  if (!slot) slot = std::make_unique<RealFft<T>>(n);
  return *slot;
}

template <typename T>
std::vector<std::complex<T>> rfft(std::span<const T> frame) {
  const auto& plan = fft_plan<T>(frame.size());
  std::vector<std::complex<T>> out(plan.bins());
  plan.forward(frame, out);
  return out;
}

template <typename T>
std::vector<T> irfft(std::span<const std::complex<T>> spectrum, std::size_t n) {
  const auto& plan = fft_plan<T>(n);
  std::vector<T> out(n);
  plan.inverse(spectrum, out);
  return out;
}

template class RealFft<float>;
template class RealFft<double>;
template const RealFft<float>& fft_plan<float>(std::size_t);
template const RealFft<double>& fft_plan<double>(std::size_t);
template std::vector<std::complex<float>> rfft<float>(std::span<const float>);
template std::vector<std::complex<double>> rfft<double>(std::span<const double>);
template std::vector<float> irfft<float>(std::span<const std::complex<float>>,
                                         std::size_t);
template std::vector<double> irfft<double>(
    std::span<const std::complex<double>>, std::size_t);

}  // namespace dronese
