// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "dronese/numerics/tensor.h"

namespace dronese {

struct StftConfig {
  std::size_t fft_size = 1024;
  std::size_t hop = 512;
  double sample_rate = 16000.0;

  std::size_t bins() const { return fft_size / 2 + 1; }
  // Frames produced for a signal of `samples` samples.
  std::size_t frames(std::size_t samples) const { return samples / hop + 1; }
  void validate() const;
};

// Complex spectrogram stored as two [F, T] planes.
template <typename T>
struct Spectrogram {
  Tensor<T> real;
  Tensor<T> imag;
  StftConfig config;

  Spectrogram() = default;
  Spectrogram(std::size_t bins, std::size_t frames, StftConfig cfg)
      : real({bins, frames}), imag({bins, frames}), config(cfg) {}

  std::size_t bins() const { return real.empty() ? 0 : real.dim(0); }
  std::size_t frames() const { return real.empty() ? 0 : real.dim(1); }
  Tensor<T> magnitude() const;
  bool operator==(const Spectrogram& other) const {
    return real == other.real && imag == other.imag;
  }
};

// Periodic Hann: 0.5 - 0.5 cos(2 pi n / N).
template <typename T>
std::vector<T> hann_window(std::size_t n);

// Index into a length-`len` signal for position `i` of the signal extended by
// repeated mirror reflection (edge sample not duplicated).
std::size_t reflect_index(long long i, std::size_t len);

// Windowed transform of one fft_size frame into bins() complex values.
template <typename T>
void analyze_frame(std::span<const T> frame, std::span<const T> window,
                   std::span<std::complex<T>> out);

// Centered STFT: the signal is reflect-padded by fft_size/2 on both ends and
// frame t is centered at sample t * hop.
template <typename T>
Spectrogram<T> stft(std::span<const T> wave, const StftConfig& config);

// Weighted overlap-add with the analysis window, normalized per sample by the
// summed squared window, trimmed to out_len samples.
template <typename T>
std::vector<T> istft(const Spectrogram<T>& spec, std::size_t out_len);

// Gradient of a scalar with respect to spec, given its gradient with respect
// to istft(spec, grad_wave.size()).
template <typename T>
Spectrogram<T> istft_backward(const Spectrogram<T>& spec,
                              std::span<const T> grad_wave);

// Per-sample overlap-add normalizer sum_t w^2(n - t*hop + fft/2) for the
// first `out_len` samples of a signal with `frames` frames.
template <typename T>
std::vector<T> istft_normalizer(const StftConfig& config, std::size_t frames,
                                std::size_t out_len);

}  // namespace dronese
