// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dronese/model/config.h"
#include "dronese/model/network.h"

namespace dronese {

// One multiply-accumulate = 1 MAC. Convolutions, linear maps, the four
// attention projections and both attention products (QK^T and AV) are
// counted; softmax, normalization, activations, gates and residual adds are
// not. Transposed convolutions count every input position (no crop credit).
inline constexpr const char* kMacConvention =
    "1 MAC = one multiply-accumulate; conv/linear/attention projections and "
    "both attention products counted; softmax, norms, activations, gates and "
    "additions excluded";

struct CostRow {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct AttentionComplexity {
  double joint = 0.0;  // joint time-frequency attention, F^2 T^2 d
  double freq_only = 0.0;  // frequency-only attention, F^2 T d
  double compressed = 0.0;  // compressed tokens, (F_F + F_S)^2 T d
  double windowed = 0.0;  // compressed and windowed, attended pairs * T * d
};

// Operation counts with all O() constants set to 1. Token counts are
// F_F = round(F / k_F), F_S = round(F / k_S) for both the compressed and
// windowed counts. Throws ConfigError on non-positive arguments or when
// F_F + F_S exceeds F.
AttentionComplexity attention_complexity(std::size_t F, std::size_t T, std::size_t d,
                                         std::size_t k_F, std::size_t k_S,
                                         std::size_t w_F, std::size_t w_S);
AttentionComplexity attention_complexity(const ModelConfig& c, std::size_t T);

// Layer row a parameter or instrumented MAC key belongs to.
std::string cost_row_of_param(const std::string& param_name);
std::string cost_row_of_mac_key(const std::string& mac_key);

// Closed-form MACs keyed exactly like the instrumented counter
// (attention split into ".qk" and ".av").
std::map<std::string, std::uint64_t> closed_form_macs(const ModelConfig& c, std::size_t T);
// Runs one forward pass of T frames under a MacCounter.
std::map<std::string, std::uint64_t> instrumented_macs(const Model<double>& model,
                                                       std::size_t T);

struct CostReport {
  std::size_t frames = 0;
  std::vector<CostRow> rows;  // registration order of the layers
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;
  AttentionComplexity attention;

  std::string to_table() const;
  std::string to_tsv() const;
  std::string to_json() const;
};

std::vector<CostRow> count_params(const Model<double>& model);
std::vector<CostRow> count_macs(const ModelConfig& c, std::size_t T);
// Parameters and closed-form MACs for T frames merged per layer.
CostReport cost_report(const Model<double>& model, std::size_t T);
// Frames of an utterance of `seconds` under the model's STFT.
std::size_t frames_for_seconds(const ModelConfig& c, double seconds);

// Published costs of the reference systems (millions of parameters,
// GMACs).
struct ReferenceCost {
  std::string name;
  double params_m = 0.0;
  double macs_g = 0.0;
};
std::vector<ReferenceCost> reference_costs();
inline constexpr const char* kTargetModel = "target";

struct ComparisonRow {
  std::string name;
  double params_m = 0.0;
  double macs_g = 0.0;
  // Reference cost over the published target cost.
  double published_param_ratio = 0.0;
  double published_mac_ratio = 0.0;
  // Reference cost over our measured cost.
  double measured_param_ratio = 0.0;
  double measured_mac_ratio = 0.0;
};

struct Comparison {
  double measured_params_m = 0.0;
  double measured_macs_g = 0.0;
  double target_params_m = 0.0;
  double target_macs_g = 0.0;
  // measured / published target.
  double param_delta = 0.0;
  double mac_delta = 0.0;
  std::vector<ComparisonRow> rows;

  std::string to_table() const;
  std::string to_json() const;
};

Comparison compare_to_reference(const CostReport& report);

}  // namespace dronese
