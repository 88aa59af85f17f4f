// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Binary checkpoint container:
//
//   bytes 0..7   magic "DRNSCKPT"
//   u32          format version
//   u64          header length H
//   H bytes      JSON header (config text, geometry ledger, tensor table,
//                optional optimizer block, free-form metadata)
//   payload      little-endian float64 tensors in table order
//
// All integers are little-endian regardless of host byte order.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dronese/model/network.h"
#include "json.hpp"

namespace dronese {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// First and second Adam moments, one tensor per parameter leaf.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<Tensor<double>> m;
  std::vector<Tensor<double>> v;
  bool operator==(const OptimizerState&) const = default;
};

struct Checkpoint {
  Model<double> model;
  std::optional<OptimizerState> optimizer;
  // Trainer progress, run provenance, anything the writer wants to keep.
  nlohmann::json metadata = nlohmann::json::object();
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws DataError on a bad magic, unknown version, truncated payload or a
// tensor table that does not match the stored config.
Checkpoint load_checkpoint(const std::string& path);

std::string checkpoint_to_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::string& bytes);

// Padding, crop and rounding choices implied by a config, as stored in the
// header for inspection.
nlohmann::json geometry_ledger(const ModelConfig& config);

}  // namespace dronese
