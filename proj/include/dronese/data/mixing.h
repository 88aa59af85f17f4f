// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dronese {

// Mean square over the whole signal.
double signal_power(std::span<const double> x);

struct Mixture {
  std::vector<double> mixture;
  double gain = 0.0;
};

// mixture = clean + gain * noise, with gain chosen so that the full-utterance
// power ratio P_clean / (gain^2 P_noise) equals snr_db. Nothing is clipped.
Mixture mix_at_snr(std::span<const double> clean, std::span<const double> noise,
                   double snr_db);

// floor((len - seg_len) / stride) + 1 windows starting at multiples of
// stride; empty when seg_len exceeds the signal.
std::vector<std::vector<double>> segment_long_noise(std::span<const double> wave,
                                                    std::size_t seg_len,
                                                    std::size_t stride);
std::size_t segment_count(std::size_t len, std::size_t seg_len, std::size_t stride);

// Truncates or zero-pads at the end.
std::vector<double> fit_length(std::span<const double> x, std::size_t len);

}  // namespace dronese
