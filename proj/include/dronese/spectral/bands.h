// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

#include "dronese/spectral/stft.h"

namespace dronese {

// Contiguous frequency groups, listed low to high.
struct BandPartition {
  std::vector<std::size_t> group_sizes;

  std::size_t groups() const { return group_sizes.size(); }
  std::size_t total() const;
  // group_sizes.size() + 1 boundaries starting at 0.
  std::vector<std::size_t> boundaries() const;
  // Throws ConfigError unless every size is >= 1 and they sum to `bins`.
  void validate(std::size_t bins) const;
  bool operator==(const BandPartition&) const = default;
};

template <typename T>
std::vector<Spectrogram<T>> band_partition(const Spectrogram<T>& spec,
                                           const BandPartition& partition);

// Inverse of band_partition.
template <typename T>
Spectrogram<T> band_merge(const std::vector<Spectrogram<T>>& groups);

// [3, F, T] channels (magnitude, real, imaginary).
template <typename T>
Tensor<T> features_3ch(const Spectrogram<T>& spec);

}  // namespace dronese
