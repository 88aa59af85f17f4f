// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dronese/model/config.h"
#include "dronese/trainer/trainer.h"

namespace dronese {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes of the command suite.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Everything a command can be configured with: model geometry, training
// settings and a few run-level keys. One key=value namespace; the model
// schema version and `preset` are accepted too.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::uint64_t init_seed = 0;     // model initialization
  std::size_t chunk_frames = 1;    // streaming batch size in frames

  std::string to_text() const;
};

// `source` is empty, a preset name ("default", "tiny") or a key=value file.
// `overrides` are key=value strings applied after it, in order. Unknown keys
// throw ConfigError.
RunConfig load_run_config(const std::string& source, const std::vector<std::string>& overrides);

// Runs one invocation; args excludes the program name. Returns the exit
// code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dronese
