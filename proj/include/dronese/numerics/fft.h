// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dronese {

// Radix-2 real FFT. Forward is unnormalized; inverse scales by 1/n, so
// irfft(rfft(x)) == x. The inverse reads only the real part of the DC and
// Nyquist bins.
template <typename T>
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(std::span<const T> in, std::span<std::complex<T>> out) const;
  void inverse(std::span<const std::complex<T>> in, std::span<T> out) const;

 private:
  void transform(std::vector<std::complex<T>>& a, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<T>> twiddle_;
};

// Shared per-size plan; thread-safe.
template <typename T>
const RealFft<T>& fft_plan(std::size_t n);

template <typename T>
std::vector<std::complex<T>> rfft(std::span<const T> frame);
template <typename T>
std::vector<T> irfft(std::span<const std::complex<T>> spectrum, std::size_t n);

bool is_power_of_two(std::size_t n);

}  // namespace dronese
