// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <random>

#include "dronese/model/config.h"
#include "dronese/numerics/errors.h"

namespace dronese::testing {

// Small model configs that pass validate(): random FFT size, band split,
// token allocation, windows, widths and depths. Rejection-samples until
// validation succeeds.
inline ModelConfig random_valid_config(std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
  for (;;) {
    ModelConfig c = ModelConfig::tiny();
    c.fft_size = std::size_t{64} << pick(0, 2);
    c.hop = c.fft_size / 2;
    const std::size_t F = c.bins();
    // Five positive group sizes summing to F.
    c.band_partition.assign(5, 1);
    for (std::size_t left = F - 5; left > 0; --left) ++c.band_partition[pick(0, 4)];
    c.full_compression = pick(2, F / 2);
    c.sub_compression = pick(2, F / 5);
    const std::size_t ft = static_cast<std::size_t>(std::llround(double(F) / c.full_compression));
    const std::size_t st = static_cast<std::size_t>(std::llround(double(F) / c.sub_compression));
    if (ft == 0 || st < 5) continue;
    c.sub_band_tokens.assign(5, 1);
    for (std::size_t left = st - 5; left > 0; --left) ++c.sub_band_tokens[pick(0, 4)];
    c.full_window = pick(1, ft + 1);
    c.sub_window = pick(1, st + 2);
    c.heads = pick(1, 2);
    c.embed_dim = c.heads * pick(2, 4);
    c.encoder_channels = {pick(2, 6), pick(2, 6), c.embed_dim};
    c.transformer_layers = pick(1, 2);
    c.tcn_layers = pick(1, 2);
    c.tcn_dilations.clear();
    for (std::size_t i = 0; i < c.tcn_layers; ++i) c.tcn_dilations.push_back(pick(1, 2));
    try {
      c.validate();
      return c;
    } catch (const ConfigError&) {
    }
  }
}

}  // namespace dronese::testing
