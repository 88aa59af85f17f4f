// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/trainer/trainer.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(mix64(seed ^ mix64(0x5eed0000ull + epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

std::uint64_t dropout_seed(std::uint64_t seed, std::uint64_t step, std::size_t k) {
  return mix64(seed ^ mix64(step * 0x100000001b3ull + k));
}

double parse_number(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty()) {
    throw ConfigError("train config '" + key + "': not a number: '" + value + "'");
  }
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  if (v < 0 || v != std::floor(v)) {
    throw ConfigError("train config '" + key + "': expected a non-negative integer");
  }
  return static_cast<std::uint64_t>(v);
}

void add_scaled(LossBreakdown& sum, const LossBreakdown& b, double s) {
  sum.total += s * b.total;
  sum.stft += s * b.stft;
  sum.mag += s * b.mag;
  sum.complex += s * b.complex;
  sum.time += s * b.time;
  sum.lsd += s * b.lsd;
  sum.cmse += s * b.cmse;
}

std::string opt_field(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

nlohmann::json cursor_json(const TrainCursor& c) {
  return {{"step", c.step},
          {"epoch", c.epoch},
          {"batch", c.batch},
          {"best_val_loss", c.best_val_loss},
          {"best_step", c.best_step},
          {"has_best", c.has_best}};
}

Checkpoint make_checkpoint(const Model<double>& model, const OptimizerState* opt,
                           const TrainCursor& cur, const TrainConfig& cfg) {
  Checkpoint ck;
  ck.model = model;
  if (opt) ck.optimizer = *opt;
  ck.metadata["trainer"] = cursor_json(cur);
  ck.metadata["train_config"] = cfg.to_text();
  return ck;
}

}  // namespace

void TrainConfig::validate() const {
  adam.validate();
  loss.validate();
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(grad_clip_norm >= 0.0)) throw ConfigError("grad_clip_norm must be >= 0");
  if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be positive");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "lr=" << adam.lr << "\n"
     << "beta1=" << adam.beta1 << "\n"
     << "beta2=" << adam.beta2 << "\n"
     << "adam_eps=" << adam.eps << "\n"
     << "epochs=" << epochs << "\n"
     << "batch_size=" << batch_size << "\n"
     << "seed=" << seed << "\n"
     << "alpha=" << loss.alpha << "\n"
     << "beta=" << loss.beta << "\n"
     << "sisdr_epsilon=" << loss.epsilon << "\n"
     << "log_floor=" << loss.log_floor << "\n"
     << "cmse_weight=" << loss.cmse_weight << "\n"
     << "lsd_weight=" << loss.lsd_weight << "\n"
     << "val_every_steps=" << val_every_steps << "\n"
     << "max_steps=" << max_steps << "\n"
     << "grad_clip_norm=" << grad_clip_norm << "\n"
     << "lr_decay=" << lr_decay << "\n"
     << "checkpoint_dir=" << checkpoint_dir << "\n"
     << "log_path=" << log_path << "\n";
  return os.str();
}

bool TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "lr") adam.lr = parse_number(key, value);
  else if (key == "beta1") adam.beta1 = parse_number(key, value);
  else if (key == "beta2") adam.beta2 = parse_number(key, value);
  else if (key == "adam_eps") adam.eps = parse_number(key, value);
  else if (key == "epochs") epochs = parse_count(key, value);
  else if (key == "batch_size") batch_size = parse_count(key, value);
  else if (key == "seed") seed = parse_count(key, value);
  else if (key == "alpha") loss.alpha = parse_number(key, value);
  else if (key == "beta") loss.beta = parse_number(key, value);
  else if (key == "sisdr_epsilon") loss.epsilon = parse_number(key, value);
  else if (key == "log_floor") loss.log_floor = parse_number(key, value);
  else if (key == "cmse_weight") loss.cmse_weight = parse_number(key, value);
  else if (key == "lsd_weight") loss.lsd_weight = parse_number(key, value);
  else if (key == "val_every_steps") val_every_steps = parse_count(key, value);
  else if (key == "max_steps") max_steps = parse_count(key, value);
  else if (key == "grad_clip_norm") grad_clip_norm = parse_number(key, value);
  else if (key == "lr_decay") lr_decay = parse_number(key, value);
  else if (key == "checkpoint_dir") checkpoint_dir = value;
  else if (key == "log_path") log_path = value;
  else return false;
  return true;
}

std::string TrainLogRow::tsv_header() {
  return "step\tepoch\tbatch\tlr\ttotal\tstft\tmag\tcomplex\ttime\tgrad_norm\tval_loss\t"
         "val_si_sdr_db";
}

std::string TrainLogRow::to_tsv() const {
  std::ostringstream os;
  os.precision(17);
  os << step << '\t' << epoch << '\t' << batch << '\t' << lr << '\t' << loss.total << '\t'
     << loss.stft << '\t' << loss.mag << '\t' << loss.complex << '\t' << loss.time << '\t'
     << grad_norm << '\t' << opt_field(val_loss) << '\t' << opt_field(val_si_sdr_db);
  return os.str();
}

Example make_example(const ModelConfig& config, std::string id, std::vector<double> noisy,
                     std::vector<double> clean) {
  if (noisy.size() != clean.size()) {
    throw ShapeError("example " + id + ": noisy and clean lengths differ");
  }
  Example ex;
  ex.id = std::move(id);
  const auto cfg = config.stft();
  ex.features = model_features(stft<double>(noisy, cfg));
  ex.clean_spec = stft<double>(clean, cfg);
  ex.noisy = std::move(noisy);
  ex.clean = std::move(clean);
  return ex;
}

std::vector<Example> examples_from_manifest(const MixtureManifest& manifest, Split split,
                                            const ModelConfig& config) {
  if (manifest.sample_rate != config.sample_rate) {
    throw DataError("manifest sample rate " + std::to_string(manifest.sample_rate) +
                    " differs from the model's " + std::to_string(config.sample_rate));
  }
  std::vector<Example> out;
  for (const auto& e : manifest.split(split)) {
    MixtureData d = materialize(e, manifest);
    out.push_back(make_example(config, e.id, std::move(d.noisy), std::move(d.clean)));
  }
  return out;
}

LossBreakdown example_loss(const Model<double>& model, const Example& ex,
                           const LossWeights& weights, bool train,
                           std::uint64_t dropout_seed,
                           std::vector<Tensor<double>>* grads) {
  Tape<double> tape(grads != nullptr);
  Bound<double> p(tape, model, grads);
  std::mt19937_64 rng(dropout_seed);
  ForwardOptions opts;
  opts.train = train;
  opts.rng = &rng;
  Var out = forward_graph(p, tape.constant(ex.features), opts);
  LossBreakdown b;
  Var loss = total_loss_op<double>(tape, out, ex.clean_spec, ex.clean, weights, &b);
  if (grads) tape.backward(loss);
  return b;
}

TrainResult train_examples(Model<double> model, const std::vector<Example>& train,
                           const std::vector<Example>& val, const TrainConfig& cfg,
                           const ResumeState* resume) {
  cfg.validate();
  if (train.empty()) throw DataError("training set is empty");
  TrainResult res;
  OptimizerState opt = resume ? resume->optimizer : make_optimizer_state(model.params());
  TrainCursor cur = resume ? resume->cursor : TrainCursor{};
  std::optional<Model<double>> best = resume ? resume->best_model : std::nullopt;

  std::ofstream log_file;
  if (!cfg.log_path.empty()) {
    const auto parent = std::filesystem::path(cfg.log_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const bool fresh = !std::filesystem::exists(cfg.log_path) ||
                       std::filesystem::file_size(cfg.log_path) == 0;
    log_file.open(cfg.log_path, std::ios::app);
    if (!log_file) throw DataError("cannot open training log " + cfg.log_path);
    if (fresh) log_file << TrainLogRow::tsv_header() << "\n";
  }
  if (!cfg.checkpoint_dir.empty()) std::filesystem::create_directories(cfg.checkpoint_dir);
  auto ckpt_path = [&](const char* name) {
    return (std::filesystem::path(cfg.checkpoint_dir) / name).string();
  };

  auto run_validation = [&](TrainLogRow& row) {
    if (val.empty()) return;
    LossBreakdown sum;
    for (const auto& ex : val) {
      add_scaled(sum, example_loss(model, ex, cfg.loss, false, 0, nullptr),
                 1.0 / double(val.size()));
    }
    if (!std::isfinite(sum.total)) {
      throw NumericError("validation loss is not finite at step " + std::to_string(cur.step));
    }
    row.val_loss = sum.total;
    row.val_si_sdr_db = -sum.time;
    if (!cur.has_best || sum.total < cur.best_val_loss) {
      cur.has_best = true;
      cur.best_val_loss = sum.total;
      cur.best_step = cur.step;
      best = model;
      if (!cfg.checkpoint_dir.empty()) {
        save_checkpoint(ckpt_path("best.ckpt"), make_checkpoint(model, nullptr, cur, cfg));
      }
    }
  };

  const std::size_t B = cfg.batch_size;
  const std::size_t batches = (train.size() + B - 1) / B;
  bool stop = false;
  while (cur.epoch < cfg.epochs && !stop) {
    const auto order = epoch_order(train.size(), cfg.seed, cur.epoch);
    const double lr = cfg.adam.lr * std::pow(cfg.lr_decay, double(cur.epoch));
    while (cur.batch < batches) {
      if (cfg.max_steps > 0 && cur.step >= cfg.max_steps) {
        stop = true;
        break;
      }
      const std::size_t lo = cur.batch * B, hi = std::min(train.size(), lo + B);
      const double scale = 1.0 / double(hi - lo);
      auto grads = model.params().zeros_like();
      LossBreakdown sum;
      std::string ids;
      for (std::size_t k = lo; k < hi; ++k) ids += (k > lo ? "," : "") + train[order[k]].id;
      const std::string where = "epoch " + std::to_string(cur.epoch) + " batch " +
                                std::to_string(cur.batch) + " [" + ids + "]";
      try {
        for (std::size_t k = lo; k < hi; ++k) {
          const auto b = example_loss(model, train[order[k]], cfg.loss, true,
                                      dropout_seed(cfg.seed, cur.step, k - lo), &grads);
          add_scaled(sum, b, scale);
        }
      } catch (const NumericError& e) {
        throw NumericError("non-finite value in " + where + ": " + e.what());
      }
      if (!std::isfinite(sum.total)) throw NumericError("non-finite loss in " + where);
      double norm2 = 0.0;
      for (auto& g : grads) {
        for (auto& x : g.values()) {
          x *= scale;
          norm2 += x * x;
        }
      }
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) throw NumericError("non-finite gradient in " + where);
      if (cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm) {
        const double c = cfg.grad_clip_norm / norm;
        for (auto& g : grads) for (auto& x : g.values()) x *= c;
      }
      AdamConfig step_cfg = cfg.adam;
      step_cfg.lr = lr;
      adam_step(model.params(), grads, opt, step_cfg);

      TrainLogRow row;
      row.step = cur.step;
      row.epoch = cur.epoch;
      row.batch = cur.batch;
      row.lr = lr;
      row.loss = sum;
      row.grad_norm = norm;
      ++cur.step;
      ++cur.batch;
      const bool due = cfg.val_every_steps > 0 ? cur.step % cfg.val_every_steps == 0
                                               : cur.batch == batches;
      if (due) run_validation(row);
      if (log_file) log_file << row.to_tsv() << "\n" << std::flush;
      res.log.push_back(row);
    }
    if (cur.batch == batches) {
      cur.batch = 0;
      ++cur.epoch;
      if (!cfg.checkpoint_dir.empty()) {
        save_checkpoint(ckpt_path("last.ckpt"), make_checkpoint(model, &opt, cur, cfg));
      }
    }
  }
  if (!cfg.checkpoint_dir.empty()) {
    save_checkpoint(ckpt_path("last.ckpt"), make_checkpoint(model, &opt, cur, cfg));
  }
  res.best_model = best ? *best : model;
  res.final_model = std::move(model);
  res.optimizer = std::move(opt);
  res.cursor = cur;
  return res;
}

TrainResult train(const Model<double>& model, const MixtureManifest& manifest,
                  const TrainConfig& cfg, const ResumeState* resume) {
  const auto tr = examples_from_manifest(manifest, Split::kTrain, model.config());
  const auto va = examples_from_manifest(manifest, Split::kVal, model.config());
  return train_examples(model, tr, va, cfg, resume);
}

Checkpoint training_checkpoint(const TrainResult& result, const TrainConfig& cfg) {
  return make_checkpoint(result.final_model, &result.optimizer, result.cursor, cfg);
}

ResumeState resume_state(const Checkpoint& ckpt) {
  if (!ckpt.optimizer) throw DataError("checkpoint has no optimizer state to resume from");
  if (!ckpt.metadata.contains("trainer")) throw DataError("checkpoint has no trainer cursor");
  const auto& j = ckpt.metadata["trainer"];
  ResumeState r;
  r.optimizer = *ckpt.optimizer;
  try {
    r.cursor.step = j.at("step").get<std::uint64_t>();
    r.cursor.epoch = j.at("epoch").get<std::size_t>();
    r.cursor.batch = j.at("batch").get<std::size_t>();
    r.cursor.best_val_loss = j.at("best_val_loss").get<double>();
    r.cursor.best_step = j.at("best_step").get<std::uint64_t>();
    r.cursor.has_best = j.at("has_best").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("trainer cursor: ") + e.what());
  }
  return r;
}

GradCheckResult training_grad_check(const ModelConfig& config, std::uint64_t seed,
                                    std::size_t frames, std::size_t coords_per_leaf,
                                    double* key_bias_max) {
  if (frames < 2) throw ConfigError("training_grad_check needs at least 2 frames");
  Model<double> model = build_model(config, seed);
  const std::size_t n = (frames - 1) * config.hop;
  std::mt19937_64 rng(mix64(seed));
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<double> clean(n), noisy(n);
  for (std::size_t i = 0; i < n; ++i) {
    clean[i] = g(rng);
    noisy[i] = clean[i] + g(rng);
  }
  const Example ex = make_example(config, "grad_check", noisy, clean);

  std::vector<Tensor<double>*> inputs;
  std::vector<std::size_t> leaf_of_input, key_biases;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    auto& leaf = model.params().leaves()[i];
    if (leaf.name.find("attn.k.bias") != std::string::npos) {
      key_biases.push_back(i);
      continue;
    }
    inputs.push_back(&leaf.tensor);
    leaf_of_input.push_back(i);
  }
  double kb = 0.0;
  Objective objective = [&](std::vector<Tensor<double>>* grads) {
    if (!grads) return example_loss(model, ex, LossWeights{}, false, 0, nullptr).total;
    auto all = model.params().zeros_like();
    const double v = example_loss(model, ex, LossWeights{}, false, 0, &all).total;
    for (std::size_t i : key_biases) {
      for (double x : all[i].values()) kb = std::max(kb, std::abs(x));
    }
    grads->clear();
    for (std::size_t i : leaf_of_input) grads->push_back(std::move(all[i]));
    return v;
  };
  auto result = grad_check(objective, inputs, std::vector<double>{1e-6, 1e-5, 1e-7},
                           coords_per_leaf, seed);
  result.worst_input = leaf_of_input[result.worst_input];
  if (key_bias_max) *key_bias_max = kb;
  return result;
}

}  // namespace dronese
