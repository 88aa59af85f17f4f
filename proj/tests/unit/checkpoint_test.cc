// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "dronese/model/checkpoint.h"
#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dronese_" + name)).string();
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.2);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

TEST_CASE("save, load and forward are bit-identical") {
  const auto model = build_model(ModelConfig::tiny(), 1);
  const std::string path = temp_path("roundtrip.ckpt");
  Checkpoint ckpt{model, std::nullopt, {{"note", "unit"}}};
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.model.config() == model.config());
  CHECK(back.model.params() == model.params());
  CHECK(!back.optimizer);
  CHECK(back.metadata["note"] == "unit");
  const auto wave = noise(3000, 2);
  CHECK(forward<double>(back.model, wave).first == forward<double>(model, wave).first);
  std::remove(path.c_str());
}

TEST_CASE("optimizer moments survive the round trip") {
  const auto model = build_model(ModelConfig::tiny(), 3);
  OptimizerState opt;
  opt.step = 17;
  opt.m = model.params().zeros_like();
  opt.v = model.params().zeros_like();
  std::mt19937_64 rng(4);
  for (auto& t : opt.m) for (auto& x : t.values()) x = double(rng()) / 3.0;
  for (auto& t : opt.v) for (auto& x : t.values()) x = double(rng()) * 1e-300;
  const Checkpoint back = checkpoint_from_bytes(checkpoint_to_bytes({model, opt, {}}));
  REQUIRE(back.optimizer);
  CHECK(*back.optimizer == opt);
}

TEST_CASE("non-default configs and special values round trip") {
  ModelConfig c = ModelConfig::tiny();
  c.causal = false;
  c.dropout = 0.3;
  auto model = build_model(c, 5);
  model.params().leaves()[0].tensor[0] = -0.0;
  model.params().leaves()[0].tensor[1] = 5e-324;
  const Checkpoint back = checkpoint_from_bytes(checkpoint_to_bytes({model, {}, {}}));
  CHECK(back.model.config() == c);
  CHECK(std::signbit(back.model.params().leaves()[0].tensor[0]));
  CHECK(back.model.params().leaves()[0].tensor[1] == 5e-324);
}

TEST_CASE("header carries the geometry ledger") {
  const auto g = geometry_ledger(ModelConfig{});
  CHECK(g["full_tokens"]["rounded"] == 8);
  CHECK(g["sub_tokens"]["rounded"] == 16);
  CHECK(g["encoder_lengths"].size() == 4);
  CHECK(g["tcn_receptive_field"] == 15);
}

TEST_CASE("corrupt checkpoints are data errors") {
  const auto model = build_model(ModelConfig::tiny(), 6);
  const std::string bytes = checkpoint_to_bytes({model, {}, {}});
  CHECK_THROWS_AS(checkpoint_from_bytes("nonsense"), DataError);
  CHECK_THROWS_AS(checkpoint_from_bytes(bytes.substr(0, bytes.size() - 1)), DataError);
  CHECK_THROWS_AS(checkpoint_from_bytes(bytes + "x"), DataError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  CHECK_THROWS_AS(checkpoint_from_bytes(bad_version), DataError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.ckpt")), DataError);
}

}  // namespace
}  // namespace dronese
