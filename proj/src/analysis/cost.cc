// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/analysis/cost.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "dronese/model/mask.h"
#include "dronese/numerics/errors.h"
#include "dronese/numerics/mac_counter.h"
#include "dronese/numerics/tape.h"
#include "json.hpp"

namespace dronese {
namespace {

std::string idx(const std::string& prefix, std::size_t i) {
  return prefix + std::to_string(i);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string strip_last(const std::string& s) {
  const auto dot = s.rfind('.');
  return dot == std::string::npos ? s : s.substr(0, dot);
}

void replace_once(std::string& s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  if (at != std::string::npos) s.replace(at, from.size(), to);
}

}  // namespace

AttentionComplexity attention_complexity(std::size_t F, std::size_t T, std::size_t d,
                                         std::size_t k_F, std::size_t k_S,
                                         std::size_t w_F, std::size_t w_S) {
  if (F == 0 || T == 0 || d == 0 || k_F == 0 || k_S == 0 || w_F == 0 || w_S == 0) {
    throw ConfigError("attention_complexity: all arguments must be positive");
  }
  const auto ff = static_cast<std::size_t>(std::llround(double(F) / double(k_F)));
  const auto fs = static_cast<std::size_t>(std::llround(double(F) / double(k_S)));
  if (ff == 0 || fs == 0) throw ConfigError("attention_complexity: compression leaves no tokens");
  if (ff + fs > F) {
    throw ConfigError("attention_complexity: " + std::to_string(ff + fs) +
                      " compressed tokens exceed " + std::to_string(F) + " bins");
  }
  const double f = double(F), t = double(T), dd = double(d);
  // (F/k_F + F/k_S)^2 on the token counts actually produced, so the
  // compressed and windowed counts describe the same token set.
  const double tokens = double(ff + fs);
  AttentionComplexity a;
  a.joint = f * f * t * t * dd;
  a.freq_only = f * f * t * dd;
  a.compressed = tokens * tokens * t * dd;
  a.windowed = double(expected_attended_pairs(ff, fs, w_F, w_S)) * t * dd;
  return a;
}

AttentionComplexity attention_complexity(const ModelConfig& c, std::size_t T) {
  return attention_complexity(c.bins(), T, c.embed_dim, c.full_compression,
                              c.sub_compression, c.full_window, c.sub_window);
}

std::string cost_row_of_param(const std::string& name) {
  std::string row = strip_last(name);
  for (const char* part : {".conv", ".norm", ".act", ".tconv", ".proj"}) {
    if (ends_with(row, part)) {
      row = strip_last(row);
      break;
    }
  }
  if (row.rfind("transformer.", 0) == 0) {
    replace_once(row, ".attn.", ".");
    for (const char* part : {".ffn.in", ".ffn.act", ".ffn.out"}) {
      if (ends_with(row, part)) row = strip_last(row);
    }
  }
  return row;
}

std::string cost_row_of_mac_key(const std::string& key) {
  if (ends_with(key, ".qk") || ends_with(key, ".av")) return strip_last(key);
  return key;
}

std::map<std::string, std::uint64_t> closed_form_macs(const ModelConfig& c, std::size_t T) {
  c.validate();
  using u64 = std::uint64_t;
  std::map<std::string, u64> m;
  const u64 t = T, d = c.embed_dim, ff = c.full_tokens(), L = c.tokens();
  const auto len = c.encoder_lengths();
  const auto sub_len = c.sub_lengths();
  const std::size_t blocks = c.encoder_kernels.size();

  u64 cin = 3;
  for (std::size_t i = 0; i < blocks; ++i) {
    const u64 cout = c.encoder_channels[i];
    m[idx("full_encoder.block", i)] = t * cin * cout * c.encoder_kernels[i] * len[i + 1];
    cin = cout;
  }
  m["full_encoder.gconv"] = t * d * len.back() * ff;
  for (std::size_t g = 0; g < c.band_partition.size(); ++g) {
    const std::string base = idx("sub_encoder.group", g);
    m[base] = t * d * c.sub_kernel * sub_len[g];
    m[base + ".fc"] = t * d * sub_len[g] * c.sub_band_tokens[g];
  }
  const u64 pairs = build_attention_mask(c).attended_pairs();
  const u64 hidden = d * c.ffn_multiplier;
  for (std::size_t n = 0; n < c.transformer_layers; ++n) {
    const std::string base = idx("transformer.layer", n);
    for (const char* p : {".q", ".k", ".v", ".o"}) m[base + p] = t * L * d * d;
    m[base + ".attn.qk"] = t * pairs * d;
    m[base + ".attn.av"] = t * pairs * d;
    m[base + ".ffn"] = 2 * t * L * d * hidden;
  }
  for (std::size_t k = 0; k < c.tcn_layers; ++k) {
    m[idx("tcn.layer", k)] = L * d * d * c.tcn_kernel * t;
  }
  m["full_decoder.fc"] = t * d * ff * len.back();
  for (std::size_t i = 0; i < blocks; ++i) {
    const u64 ci = c.encoder_channels[i];
    const u64 co = i == 0 ? 2 : c.encoder_channels[i - 1];
    m[idx("skip_gates.full", i)] = t * ci * ci * len[i + 1];
    m[idx("full_decoder.block", i)] = t * ci * co * c.encoder_kernels[i] * len[i + 1];
  }
  for (std::size_t g = 0; g < c.band_partition.size(); ++g) {
    const std::string base = idx("sub_decoder.group", g);
    const u64 tok = c.sub_band_tokens[g];
    m[base + ".fc"] = t * d * tok * sub_len[g];
    m[idx("skip_gates.sub", g)] = t * d * d * sub_len[g];
    m[base + ".pwc"] = t * d * 2 * sub_len[g];
    m[base + ".out"] = t * 2 * sub_len[g] * c.band_partition[g];
  }
  const u64 k = c.combine_kernel;
  m["combine"] = 2 * 4 * k * k * c.bins() * t;
  return m;
}

std::map<std::string, std::uint64_t> instrumented_macs(const Model<double>& model,
                                                       std::size_t T) {
  const ModelConfig& c = model.config();
  Tensor<double> features(Shape{T, 3, c.bins()});
  std::mt19937_64 rng(T);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : features.values()) v = u(rng);
  MacCounter counter;
  {
    MacCountingGuard guard(counter);
    Tape<double> tape(false);
    Bound<double> p(tape, model, nullptr);
    forward_graph(p, tape.constant(std::move(features)), ForwardOptions{});
  }
  return counter.counts();
}

std::vector<CostRow> count_params(const Model<double>& model) {
  std::vector<CostRow> rows;
  std::map<std::string, std::size_t> at;
  for (const auto& leaf : model.params().leaves()) {
    const std::string row = cost_row_of_param(leaf.name);
    auto it = at.find(row);
    if (it == at.end()) {
      it = at.emplace(row, rows.size()).first;
      rows.push_back(CostRow{row, 0, 0});
    }
    rows[it->second].params += leaf.tensor.size();
  }
  return rows;
}

std::vector<CostRow> count_macs(const ModelConfig& c, std::size_t T) {
  std::map<std::string, std::uint64_t> merged;
  for (const auto& [key, macs] : closed_form_macs(c, T)) {
    merged[cost_row_of_mac_key(key)] += macs;
  }
  std::vector<CostRow> rows;
  for (const auto& [name, macs] : merged) rows.push_back(CostRow{name, 0, macs});
  return rows;
}

CostReport cost_report(const Model<double>& model, std::size_t T) {
  CostReport r;
  r.frames = T;
  r.rows = count_params(model);
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < r.rows.size(); ++i) at[r.rows[i].name] = i;
  for (const auto& row : count_macs(model.config(), T)) {
    auto it = at.find(row.name);
    if (it == at.end()) {
      at[row.name] = r.rows.size();
      r.rows.push_back(row);
    } else {
      r.rows[it->second].macs = row.macs;
    }
  }
  for (const auto& row : r.rows) {
    r.total_params += row.params;
    r.total_macs += row.macs;
  }
  r.attention = attention_complexity(model.config(), T);
  return r;
}

std::size_t frames_for_seconds(const ModelConfig& c, double seconds) {
  const auto samples = static_cast<std::size_t>(std::llround(seconds * c.sample_rate));
  return c.stft().frames(samples);
}

std::string CostReport::to_table() const {
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof(line), "%-32s %12s %16s\n", "layer", "params", "macs");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-32s %12llu %16llu\n", r.name.c_str(),
                  static_cast<unsigned long long>(r.params),
                  static_cast<unsigned long long>(r.macs));
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-32s %12llu %16llu\n", "total",
                static_cast<unsigned long long>(total_params),
                static_cast<unsigned long long>(total_macs));
  os << line;
  std::snprintf(line, sizeof(line),
                "frames=%zu  params=%.6f M  macs=%.6f G\n"
                "attention ops: joint=%.6g freq_only=%.6g compressed=%.6g windowed=%.6g\n"
                "ratios: joint/freq_only=%.6g freq_only/compressed=%.6g "
                "compressed/windowed=%.6g freq_only/windowed=%.6g\n",
                frames, double(total_params) / 1e6, double(total_macs) / 1e9,
                attention.joint, attention.freq_only, attention.compressed, attention.windowed,
                attention.joint / attention.freq_only, attention.freq_only / attention.compressed,
                attention.compressed / attention.windowed, attention.freq_only / attention.windowed);
  os << line << "MAC convention: " << kMacConvention << "\n";
  return os.str();
}

std::string CostReport::to_tsv() const {
  std::ostringstream os;
  os << "layer\tparams\tmacs\n";
  for (const auto& r : rows) os << r.name << '\t' << r.params << '\t' << r.macs << '\n';
  os << "total\t" << total_params << '\t' << total_macs << '\n';
  return os.str();
}

std::string CostReport::to_json() const {
  nlohmann::json j;
  j["frames"] = frames;
  j["mac_convention"] = kMacConvention;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"name", r.name}, {"params", r.params}, {"macs", r.macs}});
  }
  j["total_params"] = total_params;
  j["total_macs"] = total_macs;
  j["attention"] = {{"joint", attention.joint},
                    {"freq_only", attention.freq_only},
                    {"compressed", attention.compressed},
                    {"windowed", attention.windowed}};
  return j.dump(2);
}

std::vector<ReferenceCost> reference_costs() {
  return {
      {"DCU-Net", 2.808, 32.23},
      {"SMoLnet-T", 0.187, 18.64},
      {kTargetModel, 0.105, 1.86},
  };
}

Comparison compare_to_reference(const CostReport& report) {
  Comparison c;
  c.measured_params_m = double(report.total_params) / 1e6;
  c.measured_macs_g = double(report.total_macs) / 1e9;
  const auto refs = reference_costs();
  const auto target = std::find_if(refs.begin(), refs.end(),
                                   [](const ReferenceCost& r) { return r.name == kTargetModel; });
  c.target_params_m = target->params_m;
  c.target_macs_g = target->macs_g;
  c.param_delta = c.measured_params_m / c.target_params_m;
  c.mac_delta = c.measured_macs_g / c.target_macs_g;
  for (const auto& r : refs) {
    if (r.name == kTargetModel) continue;
    ComparisonRow row;
    row.name = r.name;
    row.params_m = r.params_m;
    row.macs_g = r.macs_g;
    row.published_param_ratio = r.params_m / c.target_params_m;
    row.published_mac_ratio = r.macs_g / c.target_macs_g;
    row.measured_param_ratio = r.params_m / c.measured_params_m;
    row.measured_mac_ratio = r.macs_g / c.measured_macs_g;
    c.rows.push_back(row);
  }
  return c;
}

std::string Comparison::to_table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %9s %9s | %12s %12s | %12s %12s\n", "model",
                "params_M", "macs_G", "pub_param_x", "pub_mac_x", "our_param_x", "our_mac_x");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-12s %9.3f %9.2f | %12.2f %12.2f | %12.2f %12.2f\n",
                  r.name.c_str(), r.params_m, r.macs_g, r.published_param_ratio,
                  r.published_mac_ratio, r.measured_param_ratio, r.measured_mac_ratio);
    os << line;
  }
  std::snprintf(line, sizeof(line),
                "%-12s %9.3f %9.2f (published)\n%-12s %9.3f %9.2f (measured; x%.3f params, "
                "x%.3f MACs vs published)\n",
                kTargetModel, target_params_m, target_macs_g, "this build", measured_params_m,
                measured_macs_g, param_delta, mac_delta);
  os << line;
  return os.str();
}

std::string Comparison::to_json() const {
  nlohmann::json j;
  j["measured"] = {{"params_m", measured_params_m}, {"macs_g", measured_macs_g}};
  j["published_target"] = {{"params_m", target_params_m}, {"macs_g", target_macs_g}};
  j["delta_vs_published"] = {{"params", param_delta}, {"macs", mac_delta}};
  j["references"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["references"].push_back({{"name", r.name},
                               {"params_m", r.params_m},
                               {"macs_g", r.macs_g},
                               {"published_param_ratio", r.published_param_ratio},
                               {"published_mac_ratio", r.published_mac_ratio},
                               {"measured_param_ratio", r.measured_param_ratio},
                               {"measured_mac_ratio", r.measured_mac_ratio}});
  }
  return j.dump(2);
}

}  // namespace dronese
