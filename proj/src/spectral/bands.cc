// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/spectral/bands.h"

#include <cmath>
#include <numeric>
#include <string>

#include "dronese/numerics/errors.h"

namespace dronese {

std::size_t BandPartition::total() const {
  return std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
}

std::vector<std::size_t> BandPartition::boundaries() const {
  std::vector<std::size_t> b{0};
  for (std::size_t s : group_sizes) b.push_back(b.back() + s);
  return b;
}

void BandPartition::validate(std::size_t bins) const {
  if (group_sizes.empty()) throw ConfigError("band partition has no groups");
  for (std::size_t i = 0; i < group_sizes.size(); ++i) {
    if (group_sizes[i] == 0) {
      throw ConfigError("band partition group " + std::to_string(i) +
                        " is empty");
    }
  }
  if (total() != bins) {
    throw ConfigError("band partition covers " + std::to_string(total()) +
                      " bins, expected " + std::to_string(bins));
  }
}

template <typename T>
std::vector<Spectrogram<T>> band_partition(const Spectrogram<T>& spec,
                                           const BandPartition& partition) {
  partition.validate(spec.bins());
  const std::size_t frames = spec.frames();
  const auto bounds = partition.boundaries();
  std::vector<Spectrogram<T>> out;
  for (std::size_t g = 0; g < partition.groups(); ++g) {
    const std::size_t lo = bounds[g], size = partition.group_sizes[g];
    Spectrogram<T> part(size, frames, spec.config);
    for (std::size_t i = 0; i < size * frames; ++i) {
      part.real[i] = spec.real[lo * frames + i];
      part.imag[i] = spec.imag[lo * frames + i];
    }
    out.push_back(std::move(part));
  }
  return out;
}

template <typename T>
Spectrogram<T> band_merge(const std::vector<Spectrogram<T>>& groups) {
  if (groups.empty()) throw ConfigError("band_merge: no groups");
  const std::size_t frames = groups[0].frames();
  std::size_t bins = 0;
  for (const auto& g : groups) {
    if (g.frames() != frames) {
      throw ShapeError("band_merge: frame counts differ");
    }
    bins += g.bins();
  }
  Spectrogram<T> out(bins, frames, groups[0].config);
  std::size_t offset = 0;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.real.size(); ++i) {
      out.real[offset + i] = g.real[i];
      out.imag[offset + i] = g.imag[i];
    }
    offset += g.real.size();
  }
  return out;
}

template <typename T>
Tensor<T> features_3ch(const Spectrogram<T>& spec) {
  const std::size_t n = spec.real.size();
  Tensor<T> out({3, spec.bins(), spec.frames()});
  for (std::size_t i = 0; i < n; ++i) {
    const T re = spec.real[i], im = spec.imag[i];
    out[i] = std::sqrt(re * re + im * im);
    out[n + i] = re;
    out[2 * n + i] = im;
  }
  return out;
}

#define DRONESE_INSTANTIATE(T)                                             \
  template std::vector<Spectrogram<T>> band_partition<T>(                  \
      const Spectrogram<T>&, const BandPartition&);                        \
  template Spectrogram<T> band_merge<T>(const std::vector<Spectrogram<T>>&); \
  template Tensor<T> features_3ch<T>(const Spectrogram<T>&);

DRONESE_INSTANTIATE(float)
DRONESE_INSTANTIATE(double)

}  // namespace dronese
