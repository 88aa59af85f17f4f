// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/model/mask.h"

#include <algorithm>

#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

void fill_band(AttentionMask& mask, std::size_t offset, std::size_t n,
               std::size_t window) {
  const std::size_t w = std::min(window, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t half = window / 2;
    std::size_t start = i > half ? i - half : 0;
    start = std::min(start, n - w);
    for (std::size_t j = start; j < start + w; ++j) {
      mask.set(offset + i, offset + j, true);
    }
  }
}

}  // namespace

AttentionMask build_attention_mask(std::size_t full_tokens,
                                   std::size_t sub_tokens,
                                   std::size_t full_window,
                                   std::size_t sub_window) {
  if (full_tokens == 0 || sub_tokens == 0 || full_window == 0 ||
      sub_window == 0) {
    throw ConfigError("attention mask needs positive token counts and windows");
  }
  const std::size_t n = full_tokens + sub_tokens;
  AttentionMask mask(n);
  fill_band(mask, 0, full_tokens, full_window);
  fill_band(mask, full_tokens, sub_tokens, sub_window);
  for (std::size_t i = 0; i < full_tokens; ++i) {
    for (std::size_t j = full_tokens; j < n; ++j) {
      mask.set(i, j, true);
      mask.set(j, i, true);
    }
  }
  return mask;
}

AttentionMask build_attention_mask(const ModelConfig& config) {
  return build_attention_mask(config.full_tokens(), config.sub_tokens(),
                              config.full_window, config.sub_window);
}

std::size_t expected_attended_pairs(std::size_t full_tokens,
                                    std::size_t sub_tokens,
                                    std::size_t full_window,
                                    std::size_t sub_window) {
  return full_tokens * std::min(full_window, full_tokens) +
         2 * full_tokens * sub_tokens +
         sub_tokens * std::min(sub_window, sub_tokens);
}

}  // namespace dronese
