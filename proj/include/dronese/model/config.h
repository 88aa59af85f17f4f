// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dronese/spectral/bands.h"
#include "dronese/spectral/stft.h"

namespace dronese {

using PadPair = std::pair<std::size_t, std::size_t>;

struct ModelConfig {
  std::size_t fft_size = 1024;
  std::size_t hop = 512;
  double sample_rate = 16000.0;

  std::vector<std::size_t> band_partition{32, 32, 64, 128, 257};
  // Tokens emitted per sub-band group; sums to sub_tokens().
  std::vector<std::size_t> sub_band_tokens{1, 1, 2, 4, 8};
  std::size_t full_compression = 64;
  std::size_t sub_compression = 32;
  std::size_t full_window = 8;
  std::size_t sub_window = 8;

  std::size_t transformer_layers = 4;
  std::size_t tcn_layers = 3;
  std::size_t embed_dim = 32;
  std::size_t heads = 4;
  std::size_t ffn_multiplier = 2;

  std::vector<std::size_t> encoder_kernels{6, 8, 6};
  std::vector<std::size_t> encoder_strides{2, 2, 2};
  // Output channels of each encoder block; the last one equals embed_dim.
  std::vector<std::size_t> encoder_channels{32, 48, 32};
  // Zero padding (left, right) of each encoder block along frequency.
  std::vector<PadPair> encoder_pads{{3, 3}, {4, 4}, {2, 2}};

  std::size_t sub_kernel = 6;
  std::size_t sub_stride = 2;
  PadPair sub_pad{3, 3};

  std::size_t tcn_kernel = 3;
  std::vector<std::size_t> tcn_dilations{1, 2, 4};
  std::size_t combine_kernel = 3;

  double dropout = 0.1;
  bool causal = true;

  static ModelConfig defaults() { return ModelConfig{}; }
  // F = 33 variant used for gradient checks and fast experiments.
  static ModelConfig tiny();

  std::size_t bins() const { return fft_size / 2 + 1; }
  // round(F / k), ties away from zero.
  std::size_t full_tokens() const;
  std::size_t sub_tokens() const;
  std::size_t tokens() const { return full_tokens() + sub_tokens(); }
  std::size_t head_dim() const { return embed_dim / heads; }

  StftConfig stft() const { return StftConfig{fft_size, hop, sample_rate}; }
  BandPartition partition() const { return BandPartition{band_partition}; }

  // Frequency extent entering each encoder block plus the final one:
  // F, then one entry per block.
  std::vector<std::size_t> encoder_lengths() const;
  // Crops that make each transposed decoder block land back on the
  // corresponding encoder input length; index i mirrors encoder block i.
  std::vector<PadPair> decoder_crops() const;
  // Positions after the sub-band convolution, per group.
  std::vector<std::size_t> sub_lengths() const;

  // Temporal context of the TCN stack alone and with the combine block.
  std::size_t tcn_receptive_field() const;
  std::size_t receptive_field() const;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace dronese
