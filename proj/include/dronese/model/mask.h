// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>

#include "dronese/model/config.h"
#include "dronese/numerics/kernels.h"

namespace dronese {

// Token layout: full-band tokens first, then sub-band tokens. Within each
// band a query attends a window of min(w, band size) consecutive tokens
// starting at i - w/2, slid inward at the band edges so every row keeps the
// full window. Full/sub cross pairs are always attended.
AttentionMask build_attention_mask(std::size_t full_tokens,
                                   std::size_t sub_tokens,
                                   std::size_t full_window,
                                   std::size_t sub_window);
AttentionMask build_attention_mask(const ModelConfig& config);

// F_F min(w_F, F_F) + 2 F_F F_S + F_S min(w_S, F_S).
std::size_t expected_attended_pairs(std::size_t full_tokens,
                                    std::size_t sub_tokens,
                                    std::size_t full_window,
                                    std::size_t sub_window);

}  // namespace dronese
