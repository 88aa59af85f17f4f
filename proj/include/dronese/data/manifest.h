// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dronese {

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& s);

// One mixture. `clean` is a wav path or an inline "speech:..." spec;
// `noise` is a wav path or an inline "drone:..." spec. For file noise,
// `noise_offset` is the first sample of the segment used.
struct ManifestEntry {
  std::string id;
  Split split = Split::kTrain;
  double snr_db = 0.0;
  double duration_s = 5.0;
  std::uint64_t seed = 0;
  std::string clean;
  std::string noise;
  std::size_t noise_offset = 0;

  bool operator==(const ManifestEntry&) const = default;
};

struct MixtureManifest {
  double sample_rate = 16000.0;
  std::vector<ManifestEntry> entries;
  // Relative paths resolve against this; set by read_manifest.
  std::filesystem::path base_dir;

  std::vector<ManifestEntry> split(Split s) const;
  bool operator==(const MixtureManifest& o) const {
    return sample_rate == o.sample_rate && entries == o.entries;
  }
};

struct SplitPlan {
  Split split = Split::kTrain;
  std::vector<double> snrs;
  std::size_t per_snr = 0;
};

struct ManifestSpec {
  std::vector<std::string> clean_sources;
  std::vector<std::string> noise_sources;
  std::vector<SplitPlan> plans;
  // Speaker = file stem up to the first '_'. Listed speakers are used only
  // for the test split; empty means every source is eligible everywhere.
  std::vector<std::string> test_speakers;
  double duration_s = 5.0;
  double sample_rate = 16000.0;
  // Segment stride for long noise files, in samples; 0 means one duration.
  std::size_t noise_stride = 0;
  std::uint64_t seed = 0;
  // Directory that relative source paths are resolved against.
  std::filesystem::path base_dir;
};

// Train ladder -5..-25 dB (1440 each) and test ladder -5..-30 dB (135 each).
std::vector<SplitPlan> full_protocol_plans();

// Sorted *.wav paths under dir (non-recursive). Throws DataError when the
// directory is missing.
std::vector<std::string> list_wavs(const std::filesystem::path& dir);

MixtureManifest build_manifest(const ManifestSpec& spec);

void write_manifest(const std::filesystem::path& path, const MixtureManifest& m);
MixtureManifest read_manifest(const std::filesystem::path& path);
std::string manifest_to_text(const MixtureManifest& m);
MixtureManifest manifest_from_text(const std::string& text);

struct MixtureData {
  std::vector<double> clean;
  std::vector<double> noise;  // unscaled
  std::vector<double> noisy;
  double gain = 0.0;
};

// Loads or synthesizes both sources, fits them to the entry duration and
// mixes at the entry SNR. Pure function of the entry and the files.
MixtureData materialize(const ManifestEntry& e, const MixtureManifest& m);

}  // namespace dronese
