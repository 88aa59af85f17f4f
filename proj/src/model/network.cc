// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/model/network.h"

#include <cmath>

#include "dronese/model/mask.h"
#include "dronese/numerics/errors.h"
#include "dronese/numerics/mac_counter.h"
#include "dronese/numerics/ops.h"
#include "dronese/spectral/bands.h"

namespace dronese {
namespace {

enum class InitKind { kUniform, kOnes, kZeros, kSlope };

struct InitRule {
  InitKind kind = InitKind::kZeros;
  std::size_t fan_in = 1;
};

constexpr double kInitialSlope = 0.25;

std::string idx(const std::string& prefix, std::size_t i) {
  return prefix + std::to_string(i);
}

// Registers every leaf in a fixed order; `rules` receives the initializer.
template <typename T>
void register_params(const ModelConfig& c, ParamStore<T>& s,
                     std::vector<InitRule>* rules) {
  auto add = [&](const std::string& name, Shape shape, InitRule rule) {
    s.add(name, std::move(shape));
    if (rules) rules->push_back(rule);
  };
  auto uniform = [](std::size_t fan_in) {
    return InitRule{InitKind::kUniform, fan_in};
  };
  auto norm = [&](const std::string& name, std::size_t n) {
    add(name + ".gain", {n}, {InitKind::kOnes});
    add(name + ".shift", {n}, {InitKind::kZeros});
  };
  auto act = [&](const std::string& name, std::size_t n) {
    add(name + ".slope", {n}, {InitKind::kSlope});
  };

  const std::size_t d = c.embed_dim, ff = c.full_tokens();
  const auto lengths = c.encoder_lengths();
  const auto sub_len = c.sub_lengths();
  const std::size_t blocks = c.encoder_kernels.size();

  std::size_t cin = 3;
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::string base = idx("full_encoder.block", i);
    const std::size_t cout = c.encoder_channels[i], k = c.encoder_kernels[i];
    add(base + ".conv.weight", {cout, cin, k}, uniform(cin * k));
    add(base + ".conv.bias", {cout}, uniform(cin * k));
    norm(base + ".norm", cout);
    act(base + ".act", cout);
    cin = cout;
  }
  add("full_encoder.gconv.weight", {ff, lengths.back()}, uniform(lengths.back()));
  add("full_encoder.gconv.bias", {ff}, uniform(lengths.back()));

  for (std::size_t g = 0; g < c.band_partition.size(); ++g) {
    const std::string base = idx("sub_encoder.group", g);
    add(base + ".conv.weight", {d, 1, c.sub_kernel}, uniform(c.sub_kernel));
    add(base + ".conv.bias", {d}, uniform(c.sub_kernel));
    norm(base + ".norm", d);
    act(base + ".act", d);
    add(base + ".fc.weight", {c.sub_band_tokens[g], sub_len[g]}, uniform(sub_len[g]));
    add(base + ".fc.bias", {c.sub_band_tokens[g]}, uniform(sub_len[g]));
  }

  const std::size_t hidden = d * c.ffn_multiplier;
  for (std::size_t n = 0; n < c.transformer_layers; ++n) {
    const std::string base = idx("transformer.layer", n);
    for (const char* proj : {"q", "k", "v", "o"}) {
      add(base + ".attn." + proj + ".weight", {d, d}, uniform(d));
      add(base + ".attn." + proj + ".bias", {d}, uniform(d));
    }
    norm(base + ".norm1", d);
    add(base + ".ffn.in.weight", {hidden, d}, uniform(d));
    add(base + ".ffn.in.bias", {hidden}, uniform(d));
    act(base + ".ffn.act", hidden);
    add(base + ".ffn.out.weight", {d, hidden}, uniform(hidden));
    add(base + ".ffn.out.bias", {d}, uniform(hidden));
    norm(base + ".norm2", d);
  }

  for (std::size_t m = 0; m < c.tcn_layers; ++m) {
    const std::string base = idx("tcn.layer", m);
    add(base + ".conv.weight", {d, d, c.tcn_kernel}, uniform(d * c.tcn_kernel));
    add(base + ".conv.bias", {d}, uniform(d * c.tcn_kernel));
    norm(base + ".norm", d);
    act(base + ".act", d);
  }

  add("full_decoder.fc.weight", {lengths.back(), ff}, uniform(ff));
  add("full_decoder.fc.bias", {lengths.back()}, uniform(ff));
  for (std::size_t i = blocks; i-- > 0;) {
    const std::string base = idx("full_decoder.block", i);
    const std::size_t ci = c.encoder_channels[i];
    const std::size_t co = i == 0 ? 2 : c.encoder_channels[i - 1];
    const std::size_t k = c.encoder_kernels[i];
    add(base + ".tconv.weight", {ci, co, k}, uniform(co * k));
    add(base + ".tconv.bias", {co}, uniform(co * k));
    if (i > 0) {
      norm(base + ".norm", co);
      act(base + ".act", co);
    }
  }

  for (std::size_t g = 0; g < c.band_partition.size(); ++g) {
    const std::string base = idx("sub_decoder.group", g);
    const std::size_t t = c.sub_band_tokens[g];
    add(base + ".fc.weight", {sub_len[g], t}, uniform(t));
    add(base + ".fc.bias", {sub_len[g]}, uniform(t));
    add(base + ".pwc.weight", {2, d, 1}, uniform(d));
    add(base + ".pwc.bias", {2}, uniform(d));
    add(base + ".out.weight", {c.band_partition[g], sub_len[g]}, uniform(sub_len[g]));
    add(base + ".out.bias", {c.band_partition[g]}, uniform(sub_len[g]));
  }

  for (std::size_t i = 0; i < blocks; ++i) {
    const std::string base = idx("skip_gates.full", i);
    const std::size_t ch = c.encoder_channels[i];
    add(base + ".proj.weight", {ch, ch, 1}, uniform(ch));
    add(base + ".proj.bias", {ch}, uniform(ch));
    add(base + ".gate", {ch}, {InitKind::kZeros});
  }
  for (std::size_t g = 0; g < c.band_partition.size(); ++g) {
    const std::string base = idx("skip_gates.sub", g);
    add(base + ".proj.weight", {d, d, 1}, uniform(d));
    add(base + ".proj.bias", {d}, uniform(d));
    add(base + ".gate", {d}, {InitKind::kZeros});
  }

  const std::size_t ck = c.combine_kernel;
  add("combine.conv.weight", {2, 4, ck, ck}, uniform(4 * ck * ck));
  add("combine.conv.bias", {2}, uniform(4 * ck * ck));
  add("combine.gate", {2}, {InitKind::kZeros});
}

template <typename T>
Var gate_values(const Bound<T>& p, const std::string& name,
                const std::optional<double>& forced) {
  Tape<T>& tape = p.tape();
  if (forced) {
    Tensor<T> g(tape.value(p(name)).shape(), static_cast<T>(*forced));
    return tape.constant(std::move(g));
  }
  return ops::sigmoid(tape, p(name));
}

// x + sigmoid(gate) * proj(skip), gate per channel (axis 1).
template <typename T>
Var skip_merge(const Bound<T>& p, const std::string& base, Var x, Var skip,
               const ForwardOptions& opts) {
  Tape<T>& tape = p.tape();
  MacScope scope(base);
  Var proj = ops::conv1d(tape, skip, p(base + ".proj.weight"),
                         p(base + ".proj.bias"), Conv1dSpec{});
  Var gate = gate_values(p, base + ".gate", opts.skip_gate);
  return ops::add(tape, x, ops::scale_along(tape, proj, gate, 1));
}

// Layer norm over channels followed by per-channel PReLU on [B, C, L].
template <typename T>
Var norm_act(const Bound<T>& p, const std::string& base, Var x) {
  Tape<T>& tape = p.tape();
  Var y = ops::layer_norm(tape, x, p(base + ".norm.gain"),
                          p(base + ".norm.shift"), 1);
  return ops::prelu(tape, y, p(base + ".act.slope"), 1);
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, ParamStore<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto expected = make_param_store<T>(config_);
  if (expected.size() != params_.size()) {
    throw ConfigError("model expects " + std::to_string(expected.size()) +
                      " parameters, got " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& want = expected.leaves()[i];
    const auto& got = params_.leaves()[i];
    if (want.name != got.name || want.tensor.shape() != got.tensor.shape()) {
      throw ConfigError("parameter " + std::to_string(i) + ": expected " +
                        want.name + " " + shape_string(want.tensor.shape()) +
                        ", got " + got.name + " " +
                        shape_string(got.tensor.shape()));
    }
  }
  mask_ = build_attention_mask(config_);
}

template <typename T>
ParamStore<T> make_param_store(const ModelConfig& config) {
  config.validate();
  ParamStore<T> store;
  register_params(config, store, nullptr);
  return store;
}

Model<double> build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ParamStore<double> store;
  std::vector<InitRule> rules;
  register_params(config, store, &rules);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor<double>& t = store.leaves()[i].tensor;
    switch (rules[i].kind) {
      case InitKind::kUniform: {
        const double bound = 1.0 / std::sqrt(double(rules[i].fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : t.values()) v = dist(rng);
        break;
      }
      case InitKind::kOnes:
        t.fill(1.0);
        break;
      case InitKind::kZeros:
        t.fill(0.0);
        break;
      case InitKind::kSlope:
        t.fill(kInitialSlope);
        break;
    }
  }
  return Model<double>(config, std::move(store));
}

template <typename T>
Bound<T>::Bound(Tape<T>& tape, const Model<T>& model,
                std::vector<Tensor<T>>* grads)
    : tape_(&tape), model_(&model) {
  const auto& leaves = model.params().leaves();
  if (grads && grads->size() != leaves.size()) {
    throw ShapeError("gradient buffer count " + std::to_string(grads->size()) +
                     " does not match parameter count " +
                     std::to_string(leaves.size()));
  }
  vars_.reserve(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Tensor<T>* sink =
        grads && leaves[i].trainable ? &(*grads)[i] : nullptr;
    vars_.push_back(tape.parameter(leaves[i].tensor, sink));
  }
}

template <typename T>
Var Bound<T>::operator()(const std::string& name) const {
  return vars_[model_->params().index(name)];
}

template <typename T>
EncoderOutput encode(const Bound<T>& p, Var features) {
  Tape<T>& tape = p.tape();
  const ModelConfig& c = p.model().config();
  const auto& fv = tape.value(features);
  if (fv.rank() != 3 || fv.dim(1) != 3 || fv.dim(2) != c.bins()) {
    throw ShapeError("encoder expects features [B, 3, " +
                     std::to_string(c.bins()) + "], got " +
                     shape_string(fv.shape()));
  }
  EncoderOutput out;
  Var x = features;
  for (std::size_t i = 0; i < c.encoder_kernels.size(); ++i) {
    const std::string base = idx("full_encoder.block", i);
    MacScope scope(base);
    Conv1dSpec spec{c.encoder_strides[i], 1, c.encoder_pads[i].first,
                    c.encoder_pads[i].second};
    x = ops::conv1d(tape, x, p(base + ".conv.weight"), p(base + ".conv.bias"),
                    spec);
    x = norm_act(p, base, x);
    out.full_skips.push_back(x);
  }
  {
    MacScope scope("full_encoder.gconv");
    x = ops::linear(tape, x, p("full_encoder.gconv.weight"),
                    p("full_encoder.gconv.bias"));
  }
  out.full_tokens = ops::permute(tape, x, {0, 2, 1});

  Var mag = ops::slice(tape, features, 1, 0, 1);
  const auto bounds = c.partition().boundaries();
  std::vector<Var> tokens;
  for (std::size_t g = 0; g < c.band_partition.size(); ++g) {
    const std::string base = idx("sub_encoder.group", g);
    MacScope scope(base);
    Var band = ops::slice(tape, mag, 2, bounds[g], bounds[g + 1]);
    Conv1dSpec spec{c.sub_stride, 1, c.sub_pad.first, c.sub_pad.second};
    Var h = ops::conv1d(tape, band, p(base + ".conv.weight"),
                        p(base + ".conv.bias"), spec);
    h = norm_act(p, base, h);
    out.sub_skips.push_back(h);
    Var t;
    {
      MacScope fc("fc");
      t = ops::linear(tape, h, p(base + ".fc.weight"), p(base + ".fc.bias"));
    }
    tokens.push_back(ops::permute(tape, t, {0, 2, 1}));
  }
  out.sub_tokens = ops::concat(tape, tokens, 1);
  return out;
}

template <typename T>
Var transformer(const Bound<T>& p, Var tokens, const ForwardOptions& opts) {
  Tape<T>& tape = p.tape();
  const ModelConfig& c = p.model().config();
  const AttentionMask& mask = opts.mask ? *opts.mask : p.model().mask();
  Var x = tokens;
  for (std::size_t n = 0; n < c.transformer_layers; ++n) {
    const std::string base = idx("transformer.layer", n);
    MacScope scope(base);
    auto proj = [&](const char* which, Var in) {
      MacScope s(which);
      const std::string w = base + ".attn." + which;
      return ops::linear(tape, in, p(w + ".weight"), p(w + ".bias"));
    };
    Var q = proj("q", x), k = proj("k", x), v = proj("v", x);
    Var a;
    {
      MacScope s("attn");
      a = ops::attention(tape, q, k, v, c.heads, mask);
    }
    Var o = proj("o", a);
    x = ops::layer_norm(tape, ops::add(tape, x, o), p(base + ".norm1.gain"),
                        p(base + ".norm1.shift"), 2);
    Var h;
    {
      MacScope s("ffn");
      h = ops::linear(tape, x, p(base + ".ffn.in.weight"),
                      p(base + ".ffn.in.bias"));
      h = ops::prelu(tape, h, p(base + ".ffn.act.slope"), 2);
      h = ops::linear(tape, h, p(base + ".ffn.out.weight"),
                      p(base + ".ffn.out.bias"));
    }
    x = ops::layer_norm(tape, ops::add(tape, x, h), p(base + ".norm2.gain"),
                        p(base + ".norm2.shift"), 2);
  }
  return x;
}

Conv1dSpec tcn_sequence_spec(const ModelConfig& config, std::size_t layer) {
  const std::size_t dil = config.tcn_dilations[layer];
  const std::size_t span = dil * (config.tcn_kernel - 1);
  if (config.causal) return Conv1dSpec{1, dil, span, 0};
  return Conv1dSpec{1, dil, span / 2, span - span / 2};
}

template <typename T>
Var tcn_block(const Bound<T>& p, std::size_t layer, Var conv_input,
              Var residual, const Conv1dSpec& spec, const ForwardOptions& opts) {
  Tape<T>& tape = p.tape();
  const ModelConfig& c = p.model().config();
  const std::string base = idx("tcn.layer", layer);
  MacScope scope(base);
  Var h = ops::conv1d(tape, conv_input, p(base + ".conv.weight"),
                      p(base + ".conv.bias"), spec);
  h = norm_act(p, base, h);
  if (opts.train && c.dropout > 0.0) {
    if (!opts.rng) throw ConfigError("training forward needs an rng");
    h = ops::dropout(tape, h, c.dropout, true, *opts.rng);
  }
  return ops::add(tape, residual, h);
}

template <typename T>
Var tcn(const Bound<T>& p, Var tokens, const ForwardOptions& opts) {
  Tape<T>& tape = p.tape();
  const ModelConfig& c = p.model().config();
  Var x = ops::permute(tape, tokens, {1, 2, 0});
  for (std::size_t m = 0; m < c.tcn_layers; ++m) {
    x = tcn_block(p, m, x, x, tcn_sequence_spec(c, m), opts);
  }
  return ops::permute(tape, x, {2, 0, 1});
}

template <typename T>
Var decode(const Bound<T>& p, Var latent, const EncoderOutput& enc,
           const ForwardOptions& opts) {
  Tape<T>& tape = p.tape();
  const ModelConfig& c = p.model().config();
  const std::size_t ff = c.full_tokens();
  const auto crops = c.decoder_crops();

  Var full_tokens = ops::slice(tape, latent, 1, 0, ff);
  Var x = ops::permute(tape, full_tokens, {0, 2, 1});
  {
    MacScope scope("full_decoder.fc");
    x = ops::linear(tape, x, p("full_decoder.fc.weight"),
                    p("full_decoder.fc.bias"));
  }
  for (std::size_t i = c.encoder_kernels.size(); i-- > 0;) {
    x = skip_merge(p, idx("skip_gates.full", i), x, enc.full_skips[i], opts);
    const std::string base = idx("full_decoder.block", i);
    MacScope scope(base);
    ConvTranspose1dSpec spec{c.encoder_strides[i], crops[i].first,
                             crops[i].second};
    x = ops::conv1d_transposed(tape, x, p(base + ".tconv.weight"),
                               p(base + ".tconv.bias"), spec);
    if (i > 0) x = norm_act(p, base, x);
  }

  Var sub_latent = ops::slice(tape, latent, 1, ff, c.tokens());
  std::vector<Var> groups;
  std::size_t offset = 0;
  for (std::size_t g = 0; g < c.band_partition.size(); ++g) {
    const std::string base = idx("sub_decoder.group", g);
    const std::size_t t = c.sub_band_tokens[g];
    Var tok = ops::slice(tape, sub_latent, 1, offset, offset + t);
    offset += t;
    Var h = ops::permute(tape, tok, {0, 2, 1});
    {
      MacScope scope(base + ".fc");
      h = ops::linear(tape, h, p(base + ".fc.weight"), p(base + ".fc.bias"));
    }
    h = skip_merge(p, idx("skip_gates.sub", g), h, enc.sub_skips[g], opts);
    {
      MacScope scope(base + ".pwc");
      h = ops::conv1d(tape, h, p(base + ".pwc.weight"), p(base + ".pwc.bias"),
                      Conv1dSpec{});
    }
    {
      MacScope scope(base + ".out");
      h = ops::linear(tape, h, p(base + ".out.weight"), p(base + ".out.bias"));
    }
    groups.push_back(h);
  }
  Var sub = ops::concat(tape, groups, 2);
  return ops::concat(tape, {x, sub}, 1);
}

Conv2dSpec combine_sequence_spec(const ModelConfig& config) {
  const std::size_t k = config.combine_kernel, half = k / 2;
  if (config.causal) return Conv2dSpec{1, 1, half, half, k - 1, 0};
  return Conv2dSpec{1, 1, half, half, half, half};
}

template <typename T>
Var combine(const Bound<T>& p, Var stacked, Var full, const Conv2dSpec& spec,
            const ForwardOptions& opts) {
  Tape<T>& tape = p.tape();
  MacScope scope("combine");
  Var conv = ops::conv2d(tape, stacked, p("combine.conv.weight"),
                         p("combine.conv.bias"), spec);
  Var gate = gate_values(p, "combine.gate", opts.combine_gate);
  return ops::add(tape, full,
                  ops::scale_along(tape, ops::sub(tape, conv, full), gate, 1));
}

template <typename T>
Var forward_graph(const Bound<T>& p, Var features, const ForwardOptions& opts) {
  Tape<T>& tape = p.tape();
  const ModelConfig& c = p.model().config();
  EncoderOutput enc = encode(p, features);
  Var tokens = ops::concat(tape, {enc.full_tokens, enc.sub_tokens}, 1);
  tokens = transformer(p, tokens, opts);
  Var latent = tcn(p, tokens, opts);
  Var decoded = decode(p, latent, enc, opts);
  const std::size_t frames = tape.value(decoded).dim(0);
  Var stacked = ops::reshape(tape, ops::permute(tape, decoded, {1, 2, 0}),
                             Shape{1, 4, c.bins(), frames});
  Var full = ops::slice(tape, stacked, 1, 0, 2);
  return combine(p, stacked, full, combine_sequence_spec(c), opts);
}

template <typename T>
Tensor<T> model_features(const Spectrogram<T>& spec) {
  Tensor<T> f = features_3ch(spec);
  return permute(f, {2, 0, 1});
}

template <typename T>
Spectrogram<T> output_spectrogram(const Tensor<T>& out, const StftConfig& cfg) {
  if (out.rank() != 4 || out.dim(0) != 1 || out.dim(1) != 2) {
    throw ShapeError("network output must be [1, 2, F, T], got " +
                     shape_string(out.shape()));
  }
  const std::size_t F = out.dim(2), frames = out.dim(3), n = F * frames;
  Spectrogram<T> spec(F, frames, cfg);
  std::copy(out.data(), out.data() + n, spec.real.data());
  std::copy(out.data() + n, out.data() + 2 * n, spec.imag.data());
  return spec;
}

template <typename T>
Spectrogram<T> enhance_spectrogram(const Model<T>& model,
                                   const Spectrogram<T>& noisy,
                                   const ForwardOptions& opts) {
  Tape<T> tape(false);
  Bound<T> p(tape, model);
  Var out = forward_graph(p, tape.constant(model_features(noisy)), opts);
  return output_spectrogram(tape.value(out), noisy.config);
}

template <typename T>
std::pair<std::vector<T>, Spectrogram<T>> forward(const Model<T>& model,
                                                  std::span<const T> noisy,
                                                  const ForwardOptions& opts) {
  const auto spec = stft<T>(noisy, model.config().stft());
  auto enhanced = enhance_spectrogram(model, spec, opts);
  auto wave = istft(enhanced, noisy.size());
  return {std::move(wave), std::move(enhanced)};
}

#define DRONESE_INSTANTIATE(T)                                                \
  template class Model<T>;                                                    \
  template class Bound<T>;                                                    \
  template ParamStore<T> make_param_store<T>(const ModelConfig&);             \
  template EncoderOutput encode<T>(const Bound<T>&, Var);                     \
  template Var transformer<T>(const Bound<T>&, Var, const ForwardOptions&);   \
  template Var tcn_block<T>(const Bound<T>&, std::size_t, Var, Var,           \
                            const Conv1dSpec&, const ForwardOptions&);        \
  template Var tcn<T>(const Bound<T>&, Var, const ForwardOptions&);           \
  template Var decode<T>(const Bound<T>&, Var, const EncoderOutput&,          \
                         const ForwardOptions&);                              \
  template Var combine<T>(const Bound<T>&, Var, Var, const Conv2dSpec&,       \
                          const ForwardOptions&);                             \
  template Var forward_graph<T>(const Bound<T>&, Var, const ForwardOptions&); \
  template Tensor<T> model_features<T>(const Spectrogram<T>&);                \
  template Spectrogram<T> output_spectrogram<T>(const Tensor<T>&,             \
                                                const StftConfig&);           \
  template Spectrogram<T> enhance_spectrogram<T>(                             \
      const Model<T>&, const Spectrogram<T>&, const ForwardOptions&);         \
  template std::pair<std::vector<T>, Spectrogram<T>> forward<T>(              \
      const Model<T>&, std::span<const T>, const ForwardOptions&);

DRONESE_INSTANTIATE(float)
DRONESE_INSTANTIATE(double)

}  // namespace dronese
