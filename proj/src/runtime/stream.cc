// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/runtime/stream.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dronese/numerics/errors.h"
#include "dronese/numerics/fft.h"
#include "dronese/numerics/ops.h"
#include "json.hpp"

namespace dronese {
namespace {

std::size_t tcn_span(const ModelConfig& c, std::size_t layer) {
  return c.tcn_dilations[layer] * (c.tcn_kernel - 1);
}

void require_streamable(const ModelConfig& c) {
  if (!c.causal) throw ConfigError("streaming requires causal TCN");
}

}  // namespace

std::size_t stream_state_bytes(const ModelConfig& c, std::size_t chunk_frames,
                               std::size_t scalar_bytes) {
  const std::size_t F = c.bins(), n = c.fft_size;
  std::size_t scalars = n;                 // input ring
  scalars += n;                            // analysis window
  scalars += chunk_frames * 3 * F;         // frame queue
  for (std::size_t m = 0; m < c.tcn_layers; ++m) {
    scalars += c.tokens() * c.embed_dim * tcn_span(c, m);
  }
  scalars += 4 * F * (c.combine_kernel - 1);
  scalars += 2 * n;                        // overlap-add accumulators
  return scalars * scalar_bytes;
}

std::string LatencyReport::to_text() const {
  std::ostringstream os;
  char line[160];
  auto row = [&](const char* key, const char* fmt, auto v) {
    std::snprintf(line, sizeof(line), fmt, v);
    os << key << ": " << line << "\n";
  };
  row("algorithmic_latency", "%zu samples", algorithmic_latency_samples);
  row("algorithmic_latency_ms", "%.3f", algorithmic_latency_ms);
  row("lookahead_frames", "%zu", lookahead_frames);
  row("chunk_frames", "%zu", chunk_frames);
  row("samples_in", "%zu", samples_in);
  row("samples_out", "%zu", samples_out);
  row("frames_processed", "%zu", frames_processed);
  row("chunks_processed", "%zu", chunks_processed);
  row("chunk_ms_mean", "%.4f", chunk_ms_mean);
  row("chunk_ms_min", "%.4f", chunk_ms_min);
  row("chunk_ms_max", "%.4f", chunk_ms_max);
  row("real_time_factor", "%.5f", real_time_factor);
  row("state_bytes", "%zu", state_bytes);
  row("peak_state_bytes", "%zu", peak_state_bytes);
  return os.str();
}

std::string LatencyReport::to_json() const {
  nlohmann::json j{{"algorithmic_latency_samples", algorithmic_latency_samples},
                   {"algorithmic_latency_ms", algorithmic_latency_ms},
                   {"lookahead_frames", lookahead_frames},
                   {"chunk_frames", chunk_frames},
                   {"samples_in", samples_in},
                   {"samples_out", samples_out},
                   {"frames_processed", frames_processed},
                   {"chunks_processed", chunks_processed},
                   {"chunk_ms_mean", chunk_ms_mean},
                   {"chunk_ms_min", chunk_ms_min},
                   {"chunk_ms_max", chunk_ms_max},
                   {"total_compute_s", total_compute_s},
                   {"real_time_factor", real_time_factor},
                   {"state_bytes", state_bytes},
                   {"peak_state_bytes", peak_state_bytes}};
  return j.dump(2);
}

template <typename T>
StreamState<T>::StreamState(const Model<T>& model, std::size_t chunk_frames)
    : model_(&model),
      config_(model.config()),
      chunk_frames_(chunk_frames),
      fft_(config_.fft_size),
      hop_(config_.hop),
      pad_(config_.fft_size / 2),
      bins_(config_.bins()) {
  require_streamable(config_);
  if (chunk_frames == 0) throw ConfigError("chunk_frames must be >= 1");
  window_ = hann_window<T>(fft_);
  ring_.assign(fft_, T(0));
  queue_ = Tensor<T>({chunk_frames_, 3, bins_});
  for (std::size_t m = 0; m < config_.tcn_layers; ++m) {
    tcn_cache_.emplace_back(Shape{config_.tokens(), config_.embed_dim, tcn_span(config_, m)});
  }
  combine_cache_ = Tensor<T>({1, 4, bins_, config_.combine_kernel - 1});
  ola_.assign(fft_, T(0));
  ola_norm_.assign(fft_, T(0));
  peak_bytes_ = state_bytes();
}

template <typename T>
std::size_t StreamState<T>::state_bytes() const {
  std::size_t scalars = ring_.size() + window_.size() + queue_.size() +
                        combine_cache_.size() + ola_.size() + ola_norm_.size();
  for (const auto& c : tcn_cache_) scalars += c.size();
  return scalars * sizeof(T);
}

template <typename T>
T StreamState<T>::sample(std::size_t index) const {
  if (index >= received_ || received_ - index > fft_) {
    throw StreamError("stream sample " + std::to_string(index) +
                      " is no longer buffered");
  }
  return ring_[index % fft_];
}

template <typename T>
std::size_t StreamState<T>::frame_needs(std::size_t t) const {
  const std::size_t centre = t * hop_;
  const std::size_t right = centre + pad_ - 1;
  // The left edge reflects -i onto sample i.
  const std::size_t left = centre < pad_ ? pad_ - centre : 0;
  return std::max(right, left);
}

template <typename T>
void StreamState<T>::queue_frame(std::size_t t, std::size_t total_len) {
  std::vector<T> frame(fft_);
  const long long start = static_cast<long long>(t * hop_) - static_cast<long long>(pad_);
  for (std::size_t m = 0; m < fft_; ++m) {
    frame[m] = sample(reflect_index(start + static_cast<long long>(m), total_len));
  }
  std::vector<std::complex<T>> spec(bins_);
  analyze_frame<T>(frame, window_, spec);
  T* row = queue_.data() + queued_ * 3 * bins_;
  for (std::size_t f = 0; f < bins_; ++f) {
    const T re = spec[f].real(), im = spec[f].imag();
    row[f] = std::sqrt(re * re + im * im);
    row[bins_ + f] = re;
    row[2 * bins_ + f] = im;
  }
  ++queued_;
  ++frames_queued_;
}

template <typename T>
void StreamState<T>::run_chunk(std::vector<T>& out, std::size_t limit) {
  if (queued_ == 0) return;
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t W = queued_, F = bins_;
  const ModelConfig& c = config_;

  Tape<T> tape(false);
  Bound<T> p(tape, *model_);
  const ForwardOptions opts;
  Tensor<T> feats({W, 3, F});
  std::copy(queue_.data(), queue_.data() + feats.size(), feats.data());

  // Per-frame stages: frames are the batch axis.
  EncoderOutput enc = encode(p, tape.constant(std::move(feats)));
  Var tokens = ops::concat(tape, {enc.full_tokens, enc.sub_tokens}, 1);
  tokens = transformer(p, tokens, opts);

  // Temporal stages step forward from their caches.
  Var x = ops::permute(tape, tokens, {1, 2, 0});
  for (std::size_t m = 0; m < c.tcn_layers; ++m) {
    const std::size_t span = tcn_span(c, m);
    Var conv_in = x;
    if (span > 0) {
      conv_in = ops::concat(tape, {tape.constant(tcn_cache_[m]), x}, 2);
      tcn_cache_[m] = slice(tape.value(conv_in), 2, W, W + span);
    }
    const Conv1dSpec spec{1, c.tcn_dilations[m], 0, 0};
    x = tcn_block(p, m, conv_in, x, spec, opts);
  }
  Var latent = ops::permute(tape, x, {2, 0, 1});
  Var decoded = decode(p, latent, enc, opts);
  Var stacked = ops::reshape(tape, ops::permute(tape, decoded, {1, 2, 0}), Shape{1, 4, F, W});
  Var full = ops::slice(tape, stacked, 1, 0, 2);
  Var extended = stacked;
  const std::size_t keep = c.combine_kernel - 1;
  if (keep > 0) {
    extended = ops::concat(tape, {tape.constant(combine_cache_), stacked}, 3);
    combine_cache_ = slice(tape.value(extended), 3, W, W + keep);
  }
  const std::size_t half = c.combine_kernel / 2;
  Var y = combine(p, extended, full, Conv2dSpec{1, 1, half, half, 0, 0}, opts);
  const Tensor<T>& spec = tape.value(y);
  for (std::size_t w = 0; w < W; ++w) {
    synthesize(spec, w, W);
    emit_until(std::min(synthesized_, limit), out);
  }

  queued_ = 0;
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  chunk_ms_min_ = chunks_ == 0 ? ms : std::min(chunk_ms_min_, ms);
  chunk_ms_max_ = std::max(chunk_ms_max_, ms);
  chunk_ms_sum_ += ms;
  ++chunks_;
  peak_bytes_ = std::max(peak_bytes_, state_bytes());
}

template <typename T>
void StreamState<T>::synthesize(const Tensor<T>& out, std::size_t column,
                                std::size_t columns) {
  const std::size_t F = bins_, t = frames_done_;
  std::vector<std::complex<T>> spec(F);
  for (std::size_t f = 0; f < F; ++f) {
    spec[f] = {out[f * columns + column], out[(F + f) * columns + column]};
  }
  std::vector<T> frame(fft_);
  fft_plan<T>(fft_).inverse(spec, frame);
  for (std::size_t m = 0; m < fft_; ++m) {
    const std::size_t pos = t * hop_ + m;
    if (pos < pad_) continue;
    const std::size_t sample_index = pos - pad_;
    if (sample_index < emitted_) {
      throw StreamError("overlap-add reached an emitted sample");
    }
    const std::size_t k = sample_index - emitted_;
    if (k >= fft_) throw StreamError("overlap-add window overrun");
    ola_[k] += window_[m] * frame[m];
    ola_norm_[k] += window_[m] * window_[m];
  }
  ++frames_done_;
  // Samples left of the next frame's support are final.
  const std::size_t next = frames_done_ * hop_;
  synthesized_ = next > pad_ ? next - pad_ : 0;
}

template <typename T>
void StreamState<T>::emit_until(std::size_t end, std::vector<T>& out) {
  if (end <= emitted_) return;
  const std::size_t count = end - emitted_;
  if (count > fft_) throw StreamError("overlap-add window overrun");
  for (std::size_t k = 0; k < count; ++k) {
    if (!(ola_norm_[k] > T(1e-10))) {
      throw ConfigError("istft: sample " + std::to_string(emitted_ + k) +
                        " is not covered by any frame");
    }
    out.push_back(ola_[k] / ola_norm_[k]);
  }
  std::copy(ola_.begin() + count, ola_.end(), ola_.begin());
  std::fill(ola_.end() - count, ola_.end(), T(0));
  std::copy(ola_norm_.begin() + count, ola_norm_.end(), ola_norm_.begin());
  std::fill(ola_norm_.end() - count, ola_norm_.end(), T(0));
  emitted_ = end;
}

template <typename T>
std::vector<T> StreamState<T>::push(std::span<const T> samples) {
  if (flushed_) throw StreamError("push on a flushed stream");
  std::vector<T> out;
  for (const T s : samples) {
    if (!std::isfinite(s)) {
      throw NumericError("stream input sample " + std::to_string(received_) +
                         " is not finite");
    }
    ring_[received_ % fft_] = s;
    ++received_;
    while (frame_needs(frames_queued_) < received_) {
      queue_frame(frames_queued_, received_);
      if (queued_ == chunk_frames_) run_chunk(out, received_);
    }
  }
  return out;
}

template <typename T>
typename StreamState<T>::Flushed StreamState<T>::flush() {
  if (flushed_) throw StreamError("stream already flushed");
  flushed_ = true;
  Flushed result;
  const std::size_t total = received_;
  if (total > 0) {
    const std::size_t frames = config_.stft().frames(total);
    while (frames_queued_ < frames) {
      queue_frame(frames_queued_, total);
      if (queued_ == chunk_frames_) run_chunk(result.tail, total);
    }
    run_chunk(result.tail, total);
    emit_until(total, result.tail);
  }

  LatencyReport& r = result.report;
  r.lookahead_frames = 0;
  r.chunk_frames = chunk_frames_;
  r.algorithmic_latency_samples = fft_ + (chunk_frames_ - 1) * hop_;
  r.algorithmic_latency_ms = 1000.0 * double(r.algorithmic_latency_samples) / config_.sample_rate;
  r.samples_in = received_;
  r.samples_out = emitted_;
  r.frames_processed = frames_done_;
  r.chunks_processed = chunks_;
  r.chunk_ms_mean = chunks_ ? chunk_ms_sum_ / double(chunks_) : 0.0;
  r.chunk_ms_min = chunk_ms_min_;
  r.chunk_ms_max = chunk_ms_max_;
  r.total_compute_s = chunk_ms_sum_ / 1000.0;
  const double audio_s = double(received_) / config_.sample_rate;
  // Floor at one clock tick so an idle stream still reports a positive factor.
  r.real_time_factor =
      audio_s > 0.0 ? std::max(r.total_compute_s, 1e-9) / audio_s : 0.0;
  r.state_bytes = state_bytes();
  r.peak_state_bytes = peak_bytes_;
  return result;
}

template <typename T>
StreamState<T> create_stream(const Model<T>& model, std::size_t chunk_frames) {
  return StreamState<T>(model, chunk_frames);
}

std::vector<Chunking> standard_chunkings(const ModelConfig& c) {
  return {
      {{1}, 1},
      {{c.hop}, 1},
      {{7, 13, 101}, 1},
      {{3, c.hop + 1, 2 * c.fft_size - 1}, 2},
      {{10 * c.fft_size + 3}, 4},
  };
}

template <typename T>
std::vector<T> stream_all(const Model<T>& model, std::span<const T> wave,
                          const Chunking& chunking, LatencyReport* report) {
  if (chunking.pushes.empty()) throw ConfigError("chunking needs at least one push size");
  StreamState<T> state(model, chunking.chunk_frames);
  std::vector<T> out;
  out.reserve(wave.size());
  std::size_t pos = 0, k = 0;
  while (pos < wave.size()) {
    const std::size_t n = std::min(std::max<std::size_t>(chunking.pushes[k], 1), wave.size() - pos);
    k = (k + 1) % chunking.pushes.size();
    const auto part = state.push(wave.subspan(pos, n));
    out.insert(out.end(), part.begin(), part.end());
    pos += n;
  }
  auto flushed = state.flush();
  out.insert(out.end(), flushed.tail.begin(), flushed.tail.end());
  if (report) *report = flushed.report;
  return out;
}

template <typename T>
double equivalence_check(const Model<T>& model, std::span<const T> wave,
                         const std::vector<Chunking>& chunkings) {
  require_streamable(model.config());
  const auto offline = forward<T>(model, wave).first;
  double worst = 0.0;
  for (const auto& chunking : chunkings) {
    const auto streamed = stream_all<T>(model, wave, chunking);
    if (streamed.size() != offline.size()) {
      throw StreamError("streaming produced " + std::to_string(streamed.size()) +
                        " samples for " + std::to_string(offline.size()));
    }
    for (std::size_t i = 0; i < offline.size(); ++i) {
      worst = std::max(worst, std::abs(double(streamed[i]) - double(offline[i])));
    }
  }
  return worst;
}

#define DRONESE_INSTANTIATE(T)                                                          \
  template class StreamState<T>;                                                        \
  template StreamState<T> create_stream<T>(const Model<T>&, std::size_t);               \
  template std::vector<T> stream_all<T>(const Model<T>&, std::span<const T>,            \
                                        const Chunking&, LatencyReport*);               \
  template double equivalence_check<T>(const Model<T>&, std::span<const T>,             \
                                       const std::vector<Chunking>&);

DRONESE_INSTANTIATE(float)
DRONESE_INSTANTIATE(double)

}  // namespace dronese
