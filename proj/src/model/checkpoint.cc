// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/model/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

constexpr char kMagic[8] = {'D', 'R', 'N', 'S', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void tensor(Tensor<double>& t, const char* what) {
    for (auto& x : t.values()) x = std::bit_cast<double>(u64(what));
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void put_tensor(std::string& out, const Tensor<double>& t) {
  for (double x : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

nlohmann::json pads_json(const std::vector<PadPair>& pads) {
  auto j = nlohmann::json::array();
  for (const auto& [l, r] : pads) j.push_back({l, r});
  return j;
}

}  // namespace

nlohmann::json geometry_ledger(const ModelConfig& c) {
  nlohmann::json j;
  j["bins"] = c.bins();
  j["full_tokens"] = {{"exact", double(c.bins()) / double(c.full_compression)},
                      {"rounded", c.full_tokens()}};
  j["sub_tokens"] = {{"exact", double(c.bins()) / double(c.sub_compression)},
                     {"rounded", c.sub_tokens()}};
  j["encoder_lengths"] = c.encoder_lengths();
  j["encoder_pads"] = pads_json(c.encoder_pads);
  j["decoder_crops"] = pads_json(c.decoder_crops());
  j["sub_lengths"] = c.sub_lengths();
  j["sub_pad"] = {c.sub_pad.first, c.sub_pad.second};
  j["tcn_receptive_field"] = c.tcn_receptive_field();
  j["receptive_field"] = c.receptive_field();
  return j;
}

std::string checkpoint_to_bytes(const Checkpoint& ckpt) {
  const auto& leaves = ckpt.model.params().leaves();
  nlohmann::json header;
  header["config"] = ckpt.model.config().to_text();
  header["scalar"] = "float64";
  header["geometry"] = geometry_ledger(ckpt.model.config());
  auto table = nlohmann::json::array();
  for (const auto& leaf : leaves) {
    table.push_back({{"name", leaf.name},
                     {"shape", leaf.tensor.shape()},
                     {"trainable", leaf.trainable}});
  }
  header["params"] = table;
  if (ckpt.optimizer) {
    const auto& opt = *ckpt.optimizer;
    if (opt.m.size() != leaves.size() || opt.v.size() != leaves.size()) {
      throw ShapeError("optimizer state has " + std::to_string(opt.m.size()) +
                       " moments for " + std::to_string(leaves.size()) + " leaves");
    }
    header["optimizer"] = {{"kind", "adam"}, {"step", opt.step}};
  }
  header["metadata"] = ckpt.metadata;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  for (const auto& leaf : leaves) put_tensor(out, leaf.tensor);
  if (ckpt.optimizer) {
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (ckpt.optimizer->m[i].shape() != leaves[i].tensor.shape() ||
          ckpt.optimizer->v[i].shape() != leaves[i].tensor.shape()) {
        throw ShapeError("optimizer moment shape mismatch for " + leaves[i].name);
      }
      put_tensor(out, ckpt.optimizer->m[i]);
      put_tensor(out, ckpt.optimizer->v[i]);
    }
  }
  return out;
}

Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw DataError("not a checkpoint (bad magic)");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_len = in.u64("header length");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.take(header_len, "header"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("scalar", "") != "float64") {
    throw DataError("checkpoint scalar type must be float64");
  }

  ModelConfig config;
  try {
    config = ModelConfig::from_text(header.at("config").get<std::string>());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  ParamStore<double> store = make_param_store<double>(config);
  const auto& table = header.at("params");
  if (table.size() != store.size()) {
    throw DataError("checkpoint lists " + std::to_string(table.size()) +
                    " tensors, config expects " + std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& leaf = store.leaves()[i];
    const auto name = table[i].at("name").get<std::string>();
    const auto shape = table[i].at("shape").get<Shape>();
    if (name != leaf.name || shape != leaf.tensor.shape()) {
      throw DataError("checkpoint tensor " + std::to_string(i) + " is " + name + " " +
                      shape_string(shape) + ", config expects " + leaf.name + " " +
                      shape_string(leaf.tensor.shape()));
    }
    leaf.trainable = table[i].value("trainable", true);
    in.tensor(leaf.tensor, leaf.name.c_str());
  }

  Checkpoint ckpt;
  if (header.contains("optimizer")) {
    OptimizerState opt;
    opt.step = header["optimizer"].at("step").get<std::uint64_t>();
    opt.m = store.zeros_like();
    opt.v = store.zeros_like();
    for (std::size_t i = 0; i < store.size(); ++i) {
      in.tensor(opt.m[i], "optimizer moments");
      in.tensor(opt.v[i], "optimizer moments");
    }
    ckpt.optimizer = std::move(opt);
  }
  if (!in.done()) throw DataError("checkpoint has trailing bytes");
  ckpt.model = Model<double>(config, std::move(store));
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = checkpoint_to_bytes(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw DataError("cannot move checkpoint into place at " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_bytes(ss.str());
}

}  // namespace dronese
