// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dronese/data/manifest.h"
#include "dronese/model/network.h"

namespace dronese {

// Same definition as the time-domain loss with the metric sign.
double si_sdr_metric(std::span<const double> est, std::span<const double> ref);

// Log-spectral distance in dB on a fixed 1024/512 analysis at `sample_rate`,
// independent of any model's STFT settings.
double lsd_metric(std::span<const double> est, std::span<const double> ref,
                  double sample_rate);

struct EvalResult {
  double si_sdr_db = 0.0;
  double stoi = 0.0;
  double lsd_db = 0.0;
};

EvalResult evaluate_pair(std::span<const double> est, std::span<const double> ref,
                         double sample_rate);

struct EntryScore {
  std::string id;
  double snr_db = 0.0;
  EvalResult input;
  EvalResult enhanced;
};

struct EvalRow {
  // nullopt for the all-SNR mean row.
  std::optional<double> snr_db;
  std::size_t count = 0;
  EvalResult input;
  EvalResult enhanced;
};

struct EvalReport {
  // Bumped whenever the column set changes.
  static constexpr int kColumnsVersion = 1;
  std::vector<EntryScore> entries;  // sorted by id
  std::vector<EvalRow> per_snr;     // ascending SNR
  EvalRow mean;

  std::string to_table() const;
  std::string to_tsv() const;
  std::string to_json() const;
};

using Enhancer = std::function<std::vector<double>(const std::vector<double>& noisy)>;

// Scores every entry of `split` for the unprocessed mixture and for
// enhance(mixture). Rows are aggregated over entries sorted by id, so the
// result does not depend on manifest order.
EvalReport evaluate_set(const MixtureManifest& manifest, const Enhancer& enhance,
                        Split split = Split::kTest);
EvalReport evaluate_set(const MixtureManifest& manifest, const Model<double>& model,
                        Split split = Split::kTest);

// Aggregation only; exposed for tests.
EvalReport aggregate(std::vector<EntryScore> entries);

}  // namespace dronese
