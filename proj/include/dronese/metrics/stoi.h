// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dronese {

// Rational-rate resampler: zero-stuff by `up`, Kaiser-windowed sinc lowpass
// (beta 5, half-length 10 * max(up, down) taps at the upsampled rate, cutoff
// at the lower Nyquist), decimate by `down`. Output has ceil(n * up / down)
// samples and no group delay.
std::vector<double> resample_poly(std::span<const double> x, std::size_t up,
                                  std::size_t down);

struct StoiParams {
  double analysis_rate = 10000.0;
  std::size_t frame = 256;
  std::size_t hop = 128;
  std::size_t fft_size = 512;
  std::size_t bands = 15;
  double min_freq = 150.0;
  std::size_t segment = 30;
  double clip_db = -15.0;
  double dynamic_range_db = 40.0;
};

// Short-time objective intelligibility of `est` against the clean `ref`.
// Throws DataError when fewer than `segment` frames survive silence removal.
double stoi(std::span<const double> est, std::span<const double> ref,
            double sample_rate, const StoiParams& params = {});

}  // namespace dronese
