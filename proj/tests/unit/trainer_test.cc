// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dronese/numerics/errors.h"
#include "dronese/trainer/trainer.h"

namespace dronese {
namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

std::vector<Example> toy_set(const ModelConfig& c, std::size_t count, std::uint64_t seed) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto clean = noise(800, seed + i, 0.2);
    auto extra = noise(800, seed + 1000 + i, 0.2);
    std::vector<double> noisy(clean.size());
    for (std::size_t k = 0; k < clean.size(); ++k) noisy[k] = clean[k] + extra[k];
    out.push_back(make_example(c, "ex" + std::to_string(seed + i), noisy, clean));
  }
  return out;
}

ParamStore<double> scalar_store(double value) {
  ParamStore<double> p;
  p.add("w", Shape{1}).values()[0] = value;
  return p;
}

TEST_CASE("adam with a constant gradient moves by lr per step") {
  // m_hat = g and v_hat = g^2 exactly for a constant gradient, so each step
  // is lr * g / (|g| + eps).
  auto p = scalar_store(1.0);
  auto s = make_optimizer_state(p);
  AdamConfig cfg;
  cfg.lr = 0.01;
  std::vector<Tensor<double>> g = p.zeros_like();
  g[0].values()[0] = 0.5;
  for (int t = 0; t < 10; ++t) adam_step(p, g, s, cfg);
  CHECK(s.step == 10);
  CHECK(p["w"].values()[0] == doctest::Approx(1.0 - 10 * 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam matches a long-double reference trace") {
  const double gs[10] = {0.3, -1.2, 0.05, 2.0, -0.7, 0.0, 1e-3, -4.0, 0.9, 0.25};
  auto p = scalar_store(0.4);
  auto s = make_optimizer_state(p);
  AdamConfig cfg;
  cfg.lr = 0.05;
  long double w = 0.4L, m = 0.0L, v = 0.0L, b1t = 1.0L, b2t = 1.0L;
  auto g = p.zeros_like();
  for (double gt : gs) {
    g[0].values()[0] = gt;
    adam_step(p, g, s, cfg);
    b1t *= 0.9L;
    b2t *= 0.999L;
    m = 0.9L * m + 0.1L * gt;
    v = 0.999L * v + 0.001L * gt * gt;
    w -= 0.05L * (m / (1 - b1t)) / (std::sqrt(v / (1 - b2t)) + 1e-8L);
    CHECK(std::abs(p["w"].values()[0] - double(w)) < 1e-12);
  }
}

TEST_CASE("first adam step has magnitude lr for any gradient scale") {
  for (double gv : {1e-6, 3.0, -250.0}) {
    auto p = scalar_store(0.0);
    auto s = make_optimizer_state(p);
    AdamConfig cfg;
    cfg.lr = 1e-3;
    cfg.eps = 1e-12;
    auto g = p.zeros_like();
    g[0].values()[0] = gv;
    adam_step(p, g, s, cfg);
    CHECK(p["w"].values()[0] == doctest::Approx(-std::copysign(1e-3, gv)).epsilon(1e-5));
  }
}

TEST_CASE("zero gradients and frozen leaves leave parameters alone") {
  ParamStore<double> p;
  p.add("a", Shape{3}).values()[1] = 2.0;
  p.add("b", Shape{2}, false).values()[0] = 5.0;
  auto s = make_optimizer_state(p);
  auto g = p.zeros_like();
  g[1].values()[0] = 1.0;
  const auto before = p;
  adam_step(p, g, s, AdamConfig{});
  CHECK(p == before);
  CHECK(s.m[1].values()[0] == 0.0);
  g.pop_back();
  CHECK_THROWS_AS(adam_step(p, g, s, AdamConfig{}), ShapeError);
}

TEST_CASE("adam config validation") {
  AdamConfig c;
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AdamConfig{};
  c.eps = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AdamConfig{};
  c.lr = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("train config text round trip and errors") {
  TrainConfig a;
  a.adam.lr = 3e-3;
  a.epochs = 7;
  a.batch_size = 2;
  a.seed = 99;
  a.loss.alpha = 0.25;
  a.max_steps = 11;
  a.lr_decay = 0.97;
  a.log_path = "log.tsv";
  TrainConfig b;
  std::istringstream in(a.to_text());
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    REQUIRE(b.set(line.substr(0, eq), line.substr(eq + 1)));
  }
  CHECK(b.to_text() == a.to_text());
  CHECK_FALSE(b.set("nope", "1"));
  CHECK_THROWS_AS(b.set("epochs", "1.5"), ConfigError);
  CHECK_THROWS_AS(b.set("lr", "fast"), ConfigError);
  b.batch_size = 0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
}

TEST_CASE("zero learning rate keeps the model bitwise") {
  const auto c = ModelConfig::tiny();
  const auto model = build_model(c, 1);
  TrainConfig cfg;
  cfg.adam.lr = 0.0;
  cfg.batch_size = 2;
  const auto r = train_examples(model, toy_set(c, 3, 10), {}, cfg);
  CHECK(r.final_model.params() == model.params());
  CHECK(r.log.size() == 2);
  CHECK(r.optimizer.step == 2);
}

TEST_CASE("same seed gives the same run") {
  const auto c = ModelConfig::tiny();
  const auto model = build_model(c, 2);
  const auto data = toy_set(c, 4, 20);
  TrainConfig cfg;
  cfg.adam.lr = 1e-3;
  cfg.batch_size = 2;
  cfg.epochs = 2;
  cfg.seed = 5;
  const auto a = train_examples(model, data, {}, cfg);
  const auto b = train_examples(model, data, {}, cfg);
  REQUIRE(a.log.size() == 4);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].to_tsv() == b.log[i].to_tsv());
  CHECK(a.final_model.params() == b.final_model.params());
  cfg.seed = 6;
  const auto c2 = train_examples(model, data, {}, cfg);
  CHECK_FALSE(c2.final_model.params() == a.final_model.params());
}

TEST_CASE("resuming from a checkpoint continues bit for bit") {
  const auto c = ModelConfig::tiny();
  const auto model = build_model(c, 3);
  const auto data = toy_set(c, 5, 30);
  TrainConfig cfg;
  cfg.adam.lr = 1e-3;
  cfg.batch_size = 2;
  cfg.epochs = 3;
  cfg.max_steps = 7;
  const auto whole = train_examples(model, data, {}, cfg);
  REQUIRE(whole.log.size() == 7);

  cfg.max_steps = 4;  // stops mid-epoch (3 batches per epoch)
  const auto first = train_examples(model, data, {}, cfg);
  const auto bytes = checkpoint_to_bytes(training_checkpoint(first, cfg));
  const auto ckpt = checkpoint_from_bytes(bytes);
  const auto resume = resume_state(ckpt);
  CHECK(resume.cursor.epoch == 1);
  CHECK(resume.cursor.batch == 1);
  cfg.max_steps = 7;
  const auto rest = train_examples(ckpt.model, data, {}, cfg, &resume);
  REQUIRE(rest.log.size() == 3);
  CHECK(rest.final_model.params() == whole.final_model.params());
  CHECK(rest.optimizer == whole.optimizer);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rest.log[i].to_tsv() == whole.log[4 + i].to_tsv());

  Checkpoint bare;
  bare.model = model;
  CHECK_THROWS_AS(resume_state(bare), DataError);
}

TEST_CASE("non-finite loss names the batch") {
  const auto c = ModelConfig::tiny();
  auto data = toy_set(c, 2, 40);
  data[1].features.values()[3] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.batch_size = 1;
  try {
    train_examples(build_model(c, 4), data, {}, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("ex41") != std::string::npos);
    CHECK(msg.find("epoch 0 batch") != std::string::npos);
  }
}

TEST_CASE("validation keeps the best model and writes checkpoints and a log") {
  const auto c = ModelConfig::tiny();
  const auto dir = std::filesystem::temp_directory_path() / "dronese_trainer_test";
  std::filesystem::remove_all(dir);
  const auto model = build_model(c, 5);
  const auto train = toy_set(c, 2, 50), val = toy_set(c, 2, 60);
  TrainConfig cfg;
  cfg.adam.lr = 2e-3;
  cfg.batch_size = 1;
  cfg.epochs = 3;
  cfg.val_every_steps = 2;
  cfg.checkpoint_dir = (dir / "ck").string();
  cfg.log_path = (dir / "log.tsv").string();
  const auto r = train_examples(model, train, val, cfg);
  REQUIRE(r.cursor.has_best);
  double best = 1e300;
  std::uint64_t best_step = 0;
  std::size_t val_rows = 0;
  for (const auto& row : r.log) {
    if (!row.val_loss) continue;
    ++val_rows;
    CHECK(std::isfinite(*row.val_si_sdr_db));
    if (*row.val_loss < best) {
      best = *row.val_loss;
      best_step = row.step + 1;
    }
  }
  CHECK(val_rows == 3);
  CHECK(r.cursor.best_val_loss == best);
  CHECK(r.cursor.best_step == best_step);
  // The stored best model reproduces the best validation loss.
  double again = 0.0;
  for (const auto& ex : val) again += example_loss(r.best_model, ex, cfg.loss, false, 0, nullptr).total / 2;
  CHECK(again == doctest::Approx(best).epsilon(1e-12));
  CHECK(load_checkpoint(cfg.checkpoint_dir + "/best.ckpt").model.params() == r.best_model.params());
  CHECK(load_checkpoint(cfg.checkpoint_dir + "/last.ckpt").model.params() ==
        r.final_model.params());

  std::ifstream log(cfg.log_path);
  std::string header;
  std::getline(log, header);
  CHECK(header == TrainLogRow::tsv_header());
  std::size_t lines = 0;
  for (std::string l; std::getline(log, l);) ++lines;
  CHECK(lines == r.log.size());
  std::filesystem::remove_all(dir);
}

TEST_CASE("end-to-end parameter gradients match finite differences") {
  double key_bias = 1.0;
  const auto r = training_grad_check(ModelConfig::tiny(), 7, 8, 3, &key_bias);
  CHECK(r.coordinates > 0);
  CHECK_MESSAGE(r.max_rel_error < 1e-4, "leaf " << r.worst_input << " analytic "
                                                << r.analytic << " numeric " << r.numeric);
  CHECK(key_bias < 1e-12);
}

}  // namespace
}  // namespace dronese
