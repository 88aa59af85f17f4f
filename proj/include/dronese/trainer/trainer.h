// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dronese/data/manifest.h"
#include "dronese/loss/losses.h"
#include "dronese/model/checkpoint.h"
#include "dronese/numerics/grad_check.h"
#include "dronese/trainer/adam.h"

namespace dronese {

struct TrainConfig {
  AdamConfig adam;
  std::size_t epochs = 1;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  LossWeights loss;
  // Validate every this many steps; 0 means at the end of every epoch.
  std::size_t val_every_steps = 0;
  // Stop after this many optimizer steps in total; 0 means no limit.
  std::size_t max_steps = 0;
  // Off by default.
  double grad_clip_norm = 0.0;
  double lr_decay = 1.0;  // per-epoch multiplicative factor
  std::string checkpoint_dir;
  std::string log_path;

  void validate() const;
  // key=value lines; keys as written by to_text().
  std::string to_text() const;
  // Applies one key; returns false for keys it does not own.
  bool set(const std::string& key, const std::string& value);
};

struct TrainLogRow {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double lr = 0.0;
  LossBreakdown loss;
  double grad_norm = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_si_sdr_db;

  static std::string tsv_header();
  std::string to_tsv() const;
};

// One training pair with its precomputed network input and targets.
struct Example {
  std::string id;
  std::vector<double> noisy;
  std::vector<double> clean;
  Tensor<double> features;
  Spectrogram<double> clean_spec;
};

Example make_example(const ModelConfig& config, std::string id, std::vector<double> noisy,
                     std::vector<double> clean);
std::vector<Example> examples_from_manifest(const MixtureManifest& manifest, Split split,
                                            const ModelConfig& config);

// Forward + total loss for one example. With `grads` set (one tensor per
// leaf) the parameter gradients are added into it. Dropout runs only when
// `train` is set, with masks drawn from `dropout_seed`.
LossBreakdown example_loss(const Model<double>& model, const Example& ex,
                           const LossWeights& weights, bool train,
                           std::uint64_t dropout_seed,
                           std::vector<Tensor<double>>* grads);

// Where a run stands; enough to continue it bit for bit.
struct TrainCursor {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::size_t batch = 0;  // next batch within `epoch`
  double best_val_loss = 0.0;
  std::uint64_t best_step = 0;
  bool has_best = false;
};

struct ResumeState {
  OptimizerState optimizer;
  TrainCursor cursor;
  std::optional<Model<double>> best_model;
};

struct TrainResult {
  Model<double> final_model;
  // Best on validation; the final model when there is no validation data.
  Model<double> best_model;
  OptimizerState optimizer;
  TrainCursor cursor;
  std::vector<TrainLogRow> log;
};

// Minibatch Adam on `train`. Deterministic for a fixed config: the epoch
// order is a seeded shuffle, dropout masks are seeded per step and example,
// and gradients are reduced in batch order. A non-finite loss or gradient
// aborts with NumericError naming the epoch, batch and example ids.
TrainResult train_examples(Model<double> model, const std::vector<Example>& train,
                           const std::vector<Example>& val, const TrainConfig& cfg,
                           const ResumeState* resume = nullptr);
TrainResult train(const Model<double>& model, const MixtureManifest& manifest,
                  const TrainConfig& cfg, const ResumeState* resume = nullptr);

// Checkpoint with optimizer state and cursor, and the inverse.
Checkpoint training_checkpoint(const TrainResult& result, const TrainConfig& cfg);
ResumeState resume_state(const Checkpoint& ckpt);

// Finite-difference check of d(total loss)/d(parameters) through the whole
// forward pass for a random model and random signals of `frames` frames.
// Key-projection biases are excluded from the relative check because
// softmax makes their gradient identically zero; the largest magnitude of
// their analytic gradient is returned in `key_bias_max`. worst_input is a
// parameter leaf index.
GradCheckResult training_grad_check(const ModelConfig& config, std::uint64_t seed,
                                    std::size_t frames, std::size_t coords_per_leaf,
                                    double* key_bias_max = nullptr);

}  // namespace dronese
