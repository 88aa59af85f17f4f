// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dronese {

// Hovering-multirotor stand-in: blade-pass harmonic stack, low-passed
// broadband bed and a slow amplitude wobble. Defaults are plausibility
// values only.
struct DroneNoiseSpec {
  double blade_pass_hz = 190.0;
  std::size_t n_harmonics = 12;
  double harmonic_decay_db_per_octave = 4.0;
  // Relative to the harmonic stack RMS; -inf disables the bed.
  double broadband_level_db = -12.0;
  // One-pole low-pass coefficient applied to the white bed.
  double broadband_pole = 0.7;
  double am_depth = 0.2;
  double am_rate_hz = 1.5;
  std::uint64_t seed = 0;

  void validate() const;
  // Compact inline form, e.g. "drone:bp=190,h=12,decay=4,bb=-12,pole=0.7,
  // am=0.2,am_hz=1.5,seed=7". parse() accepts any subset of keys.
  std::string to_string() const;
  static DroneNoiseSpec parse(const std::string& text);
};

// Deterministic per seed; RMS-normalized to 1.
std::vector<double> synth_drone_noise(const DroneNoiseSpec& spec, double duration_s,
                                      double sample_rate);

// Voiced syllables (harmonic source through vowel formant peaks, random
// pitch and level) with occasional fricative bursts and short pauses.
// Used wherever a corpus of real utterances is unavailable.
struct SpeechSpec {
  double f0_min = 90.0;
  double f0_max = 220.0;
  double rms = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_string() const;
  static SpeechSpec parse(const std::string& text);
};

std::vector<double> synth_speech(const SpeechSpec& spec, double duration_s,
                                 double sample_rate);

}  // namespace dronese
