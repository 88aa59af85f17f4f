// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/model/config.h"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "dronese/numerics/errors.h"
#include "dronese/numerics/fft.h"
#include "dronese/numerics/kernels.h"

namespace dronese {
namespace {

constexpr int kSchemaVersion = 1;

std::size_t rounded_ratio(std::size_t num, std::size_t den) {
  return static_cast<std::size_t>(std::llround(double(num) / double(den)));
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string join_pads(const std::vector<PadPair>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i].first) + ":" + std::to_string(v[i].second);
  }
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size() || v < 0) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a non-negative "
                      "integer, got '" + s + "'");
  }
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::vector<std::size_t> parse_list(const std::string& key,
                                    const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_size(key, part));
  return out;
}

PadPair parse_pad(const std::string& key, const std::string& s) {
  auto parts = split(s, ':');
  if (parts.size() != 2) {
    throw ConfigError("config key '" + key + "': expected left:right, got '" +
                      s + "'");
  }
  return {parse_size(key, parts[0]), parse_size(key, parts[1])};
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" +
                    s + "'");
}

}  // namespace

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.fft_size = 64;
  c.hop = 32;
  c.band_partition = {2, 2, 4, 8, 17};
  c.sub_band_tokens = {1, 1, 1, 2, 3};
  c.full_compression = 8;
  c.sub_compression = 4;
  c.full_window = 2;
  c.sub_window = 4;
  c.transformer_layers = 1;
  c.tcn_layers = 1;
  c.embed_dim = 8;
  c.heads = 2;
  c.encoder_channels = {4, 6, 8};
  c.tcn_dilations = {1};
  return c;
}

std::size_t ModelConfig::full_tokens() const {
  return rounded_ratio(bins(), full_compression);
}

std::size_t ModelConfig::sub_tokens() const {
  return rounded_ratio(bins(), sub_compression);
}

std::vector<std::size_t> ModelConfig::encoder_lengths() const {
  std::vector<std::size_t> lengths{bins()};
  for (std::size_t i = 0; i < encoder_kernels.size(); ++i) {
    Conv1dSpec spec{encoder_strides[i], 1, encoder_pads[i].first,
                    encoder_pads[i].second};
    lengths.push_back(
        conv1d_output_length(lengths.back(), encoder_kernels[i], spec));
  }
  return lengths;
}

std::vector<PadPair> ModelConfig::decoder_crops() const {
  const auto lengths = encoder_lengths();
  std::vector<PadPair> crops;
  for (std::size_t i = 0; i < encoder_kernels.size(); ++i) {
    const std::size_t full =
        (lengths[i + 1] - 1) * encoder_strides[i] + encoder_kernels[i];
    const std::size_t left = encoder_pads[i].first;
    if (full < left + lengths[i]) {
      throw ConfigError("decoder block " + std::to_string(i) +
                        " cannot reach length " + std::to_string(lengths[i]));
    }
    crops.push_back({left, full - left - lengths[i]});
  }
  return crops;
}

std::vector<std::size_t> ModelConfig::sub_lengths() const {
  std::vector<std::size_t> out;
  Conv1dSpec spec{sub_stride, 1, sub_pad.first, sub_pad.second};
  for (std::size_t size : band_partition) {
    out.push_back(conv1d_output_length(size, sub_kernel, spec));
  }
  return out;
}

std::size_t ModelConfig::tcn_receptive_field() const {
  std::size_t rf = 1;
  for (std::size_t l = 0; l < tcn_layers; ++l) {
    rf += tcn_dilations[l] * (tcn_kernel - 1);
  }
  return rf;
}

std::size_t ModelConfig::receptive_field() const {
  return tcn_receptive_field() + combine_kernel - 1;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (fft_size < 4 || !is_power_of_two(fft_size)) {
    fail("fft_size must be a power of two >= 4");
  }
  stft().validate();
  partition().validate(bins());
  if (sub_band_tokens.size() != band_partition.size()) {
    fail("sub_band_tokens needs one entry per band group");
  }
  for (std::size_t t : sub_band_tokens) {
    if (t == 0) fail("every sub-band group needs at least one token");
  }
  if (full_compression == 0 || sub_compression == 0) {
    fail("compression ratios must be positive");
  }
  if (full_tokens() == 0 || sub_tokens() == 0) {
    fail("compression ratios leave no tokens");
  }
  if (tokens() > bins()) {
    fail(std::to_string(tokens()) + " compressed tokens exceed " +
         std::to_string(bins()) + " bins");
  }
  if (std::accumulate(sub_band_tokens.begin(), sub_band_tokens.end(),
                      std::size_t{0}) != sub_tokens()) {
    fail("sub_band_tokens sum to " +
         std::to_string(std::accumulate(sub_band_tokens.begin(),
                                        sub_band_tokens.end(), std::size_t{0})) +
         " but bins/sub_compression rounds to " + std::to_string(sub_tokens()));
  }
  if (full_window == 0 || sub_window == 0) fail("attention windows must be >= 1");
  if (embed_dim == 0 || heads == 0) fail("embed_dim and heads must be positive");
  if (embed_dim % heads != 0) {
    fail("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " +
         std::to_string(heads));
  }
  if (ffn_multiplier == 0) fail("ffn_multiplier must be positive");
  const std::size_t blocks = encoder_kernels.size();
  if (blocks == 0) fail("encoder needs at least one block");
  if (encoder_strides.size() != blocks || encoder_channels.size() != blocks ||
      encoder_pads.size() != blocks) {
    fail("encoder kernels, strides, channels and pads must have equal length");
  }
  for (std::size_t i = 0; i < blocks; ++i) {
    if (encoder_kernels[i] == 0 || encoder_strides[i] == 0 ||
        encoder_channels[i] == 0) {
      fail("encoder block " + std::to_string(i) + " has a zero size");
    }
  }
  if (encoder_channels.back() != embed_dim) {
    fail("last encoder channel count must equal embed_dim");
  }
  std::vector<std::size_t> lengths;
  try {
    lengths = encoder_lengths();
    decoder_crops();
    sub_lengths();
  } catch (const ShapeError& e) {
    fail(std::string("encoder geometry: ") + e.what());
  }
  if (sub_kernel == 0 || sub_stride == 0) fail("sub_kernel/sub_stride must be >= 1");
  if (tcn_kernel == 0) fail("tcn_kernel must be >= 1");
  if (tcn_dilations.size() < tcn_layers) {
    fail("tcn_dilations needs one entry per TCN layer");
  }
  for (std::size_t l = 0; l < tcn_layers; ++l) {
    if (tcn_dilations[l] == 0) fail("tcn dilations must be >= 1");
  }
  if (combine_kernel == 0 || combine_kernel % 2 == 0) {
    fail("combine_kernel must be odd");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "schema=" << kSchemaVersion << "\n"
      << "fft_size=" << fft_size << "\n"
      << "hop=" << hop << "\n"
      << "sample_rate=" << sample_rate << "\n"
      << "band_partition=" << join(band_partition) << "\n"
      << "sub_band_tokens=" << join(sub_band_tokens) << "\n"
      << "full_compression=" << full_compression << "\n"
      << "sub_compression=" << sub_compression << "\n"
      << "full_window=" << full_window << "\n"
      << "sub_window=" << sub_window << "\n"
      << "transformer_layers=" << transformer_layers << "\n"
      << "tcn_layers=" << tcn_layers << "\n"
      << "embed_dim=" << embed_dim << "\n"
      << "heads=" << heads << "\n"
      << "ffn_multiplier=" << ffn_multiplier << "\n"
      << "encoder_kernels=" << join(encoder_kernels) << "\n"
      << "encoder_strides=" << join(encoder_strides) << "\n"
      << "encoder_channels=" << join(encoder_channels) << "\n"
      << "encoder_pads=" << join_pads(encoder_pads) << "\n"
      << "sub_kernel=" << sub_kernel << "\n"
      << "sub_stride=" << sub_stride << "\n"
      << "sub_pad=" << sub_pad.first << ":" << sub_pad.second << "\n"
      << "tcn_kernel=" << tcn_kernel << "\n"
      << "tcn_dilations=" << join(tcn_dilations) << "\n"
      << "combine_kernel=" << combine_kernel << "\n"
      << "dropout=" << dropout << "\n"
      << "causal=" << (causal ? "true" : "false") << "\n";
  return out.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    }
    auto key = line.substr(0, eq), value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    kv[key] = value;
  }
  if (auto it = kv.find("preset"); it != kv.end()) {
    if (it->second == "tiny") {
      c = tiny();
    } else if (it->second != "default") {
      throw ConfigError("unknown preset '" + it->second + "'");
    }
    kv.erase(it);
  }
  if (auto it = kv.find("schema"); it != kv.end()) {
    if (parse_size("schema", it->second) != kSchemaVersion) {
      throw ConfigError("unsupported config schema " + it->second);
    }
    kv.erase(it);
  }
  for (const auto& [key, value] : kv) {
    if (key == "fft_size") c.fft_size = parse_size(key, value);
    else if (key == "hop") c.hop = parse_size(key, value);
    else if (key == "sample_rate") c.sample_rate = parse_double(key, value);
    else if (key == "band_partition") c.band_partition = parse_list(key, value);
    else if (key == "sub_band_tokens") c.sub_band_tokens = parse_list(key, value);
    else if (key == "full_compression") c.full_compression = parse_size(key, value);
    else if (key == "sub_compression") c.sub_compression = parse_size(key, value);
    else if (key == "full_window") c.full_window = parse_size(key, value);
    else if (key == "sub_window") c.sub_window = parse_size(key, value);
    else if (key == "transformer_layers") c.transformer_layers = parse_size(key, value);
    else if (key == "tcn_layers") c.tcn_layers = parse_size(key, value);
    else if (key == "embed_dim") c.embed_dim = parse_size(key, value);
    else if (key == "heads") c.heads = parse_size(key, value);
    else if (key == "ffn_multiplier") c.ffn_multiplier = parse_size(key, value);
    else if (key == "encoder_kernels") c.encoder_kernels = parse_list(key, value);
    else if (key == "encoder_strides") c.encoder_strides = parse_list(key, value);
    else if (key == "encoder_channels") c.encoder_channels = parse_list(key, value);
    else if (key == "encoder_pads") {
      c.encoder_pads.clear();
      for (const auto& p : split(value, ',')) c.encoder_pads.push_back(parse_pad(key, p));
    } else if (key == "sub_kernel") c.sub_kernel = parse_size(key, value);
    else if (key == "sub_stride") c.sub_stride = parse_size(key, value);
    else if (key == "sub_pad") c.sub_pad = parse_pad(key, value);
    else if (key == "tcn_kernel") c.tcn_kernel = parse_size(key, value);
    else if (key == "tcn_dilations") c.tcn_dilations = parse_list(key, value);
    else if (key == "combine_kernel") c.combine_kernel = parse_size(key, value);
    else if (key == "dropout") c.dropout = parse_double(key, value);
    else if (key == "causal") c.causal = parse_bool(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

}  // namespace dronese
