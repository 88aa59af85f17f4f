// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Network graph. Tensors are frame-major: per-frame stages run with the
// frame index as the batch axis, so the same code serves offline (all
// frames) and streaming (one frame) evaluation.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dronese/model/config.h"
#include "dronese/model/params.h"
#include "dronese/numerics/kernels.h"
#include "dronese/numerics/tape.h"
#include "dronese/spectral/stft.h"

namespace dronese {

template <typename T>
class Model {
 public:
  Model() = default;
  Model(ModelConfig config, ParamStore<T> params);

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const AttentionMask& mask() const { return mask_; }

  template <typename U>
  Model<U> cast() const {
    return Model<U>(config_, params_.template cast<U>());
  }

 private:
  ModelConfig config_;
  ParamStore<T> params_;
  AttentionMask mask_;
};

// Registers every parameter of `config` with its shape, zero-filled.
template <typename T>
ParamStore<T> make_param_store(const ModelConfig& config);

// Weights and biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)); norm gains 1,
// shifts 0; activation slopes 0.25; gate logits 0.
Model<double> build_model(const ModelConfig& config, std::uint64_t seed);

struct ForwardOptions {
  bool train = false;
  std::mt19937_64* rng = nullptr;
  // Test overrides: fixed sigmoid outputs for the combine gate and for every
  // skip gate, and a replacement attention mask.
  std::optional<double> combine_gate;
  std::optional<double> skip_gate;
  const AttentionMask* mask = nullptr;
};

// Parameters bound to one tape.
template <typename T>
class Bound {
 public:
  // With `grads` set (one tensor per leaf) trainable leaves accumulate
  // gradients there on backward().
  Bound(Tape<T>& tape, const Model<T>& model,
        std::vector<Tensor<T>>* grads = nullptr);
  Var operator()(const std::string& name) const;
  Tape<T>& tape() const { return *tape_; }
  const Model<T>& model() const { return *model_; }

 private:
  Tape<T>* tape_;
  const Model<T>* model_;
  std::vector<Var> vars_;
};

struct EncoderOutput {
  Var full_tokens;                // [B, F_F, d]
  Var sub_tokens;                 // [B, F_S, d]
  std::vector<Var> full_skips;    // encoder block outputs [B, C_i, L_{i+1}]
  std::vector<Var> sub_skips;     // per group [B, d, L'_g]
};

// features: [B, 3, F] (magnitude, real, imaginary) per frame.
template <typename T>
EncoderOutput encode(const Bound<T>& p, Var features);

// tokens: [B, L, d].
template <typename T>
Var transformer(const Bound<T>& p, Var tokens, const ForwardOptions& opts);

// One residual TCN block. `conv_input` is [L, d, W] and is convolved with
// `spec`; `residual` holds the frames the output lines up with.
template <typename T>
Var tcn_block(const Bound<T>& p, std::size_t layer, Var conv_input,
              Var residual, const Conv1dSpec& spec, const ForwardOptions& opts);
// Padding that keeps the TCN block length-preserving over a whole sequence.
Conv1dSpec tcn_sequence_spec(const ModelConfig& config, std::size_t layer);
// tokens: [T, L, d] -> [T, L, d].
template <typename T>
Var tcn(const Bound<T>& p, Var tokens, const ForwardOptions& opts);

// latent: [B, L, d] -> [B, 4, F]: full-path (real, imag) then sub-path.
template <typename T>
Var decode(const Bound<T>& p, Var latent, const EncoderOutput& enc,
           const ForwardOptions& opts);

// stacked: [1, 4, F, W] decoded channels over time; full: [1, 2, F, W'] the
// full-path channels at the output frames. Returns [1, 2, F, W'].
template <typename T>
Var combine(const Bound<T>& p, Var stacked, Var full, const Conv2dSpec& spec,
            const ForwardOptions& opts);
Conv2dSpec combine_sequence_spec(const ModelConfig& config);

// features: [T, 3, F] -> enhanced spectrum [1, 2, F, T].
template <typename T>
Var forward_graph(const Bound<T>& p, Var features, const ForwardOptions& opts);

// [T, 3, F] frame-major features of a spectrogram.
template <typename T>
Tensor<T> model_features(const Spectrogram<T>& spec);
// [1, 2, F, T] network output as a spectrogram.
template <typename T>
Spectrogram<T> output_spectrogram(const Tensor<T>& out, const StftConfig& cfg);

template <typename T>
Spectrogram<T> enhance_spectrogram(const Model<T>& model,
                                   const Spectrogram<T>& noisy,
                                   const ForwardOptions& opts = {});

// Waveform in, (enhanced waveform of the same length, enhanced spectrum) out.
template <typename T>
std::pair<std::vector<T>, Spectrogram<T>> forward(
    const Model<T>& model, std::span<const T> noisy,
    const ForwardOptions& opts = {});

}  // namespace dronese
