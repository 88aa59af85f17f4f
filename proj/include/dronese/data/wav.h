// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dronese {

enum class WavEncoding { kPcm16, kFloat32, kFloat64 };

struct WavInfo {
  std::uint32_t sample_rate = 0;
  std::uint16_t channels = 0;
  WavEncoding encoding = WavEncoding::kFloat32;
  std::size_t frames = 0;
};

// Mono only. 16-bit PCM decodes as v / 32768, so the range is [-1, 1).
// Throws DataError on malformed files, multichannel audio, unsupported
// encodings, or a sample rate other than `expected_rate`.
std::vector<double> load_wav(const std::filesystem::path& path,
                             std::uint32_t expected_rate = 16000);
WavInfo read_wav_info(const std::filesystem::path& path);

// Float encodings store values unclipped. PCM16 clips to [-1, 1) and rounds
// to nearest.
void save_wav(const std::filesystem::path& path,
              const std::vector<double>& wave, std::uint32_t sample_rate = 16000,
              WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace dronese
