// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Chunked streaming inference. Samples go in at any granularity; complete
// analysis frames are run through the per-frame stages in groups of
// `chunk_frames`, the TCN and the combine block step forward with fixed-size
// caches, and enhanced samples leave through an overlap-add accumulator.
//
// Every frame sees exactly the samples the offline centered STFT gives it,
// including the reflected left edge; the right-edge reflection is applied by
// flush() once the stream length is known. Output sample n is emitted as
// soon as the last frame covering it has been synthesized.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dronese/model/network.h"

namespace dronese {

struct LatencyReport {
  // Samples between an input sample arriving and its enhanced counterpart
  // becoming available: the analysis window plus the wait for a full chunk
  // of frames. No lookahead in causal configs.
  std::size_t algorithmic_latency_samples = 0;
  double algorithmic_latency_ms = 0.0;
  std::size_t lookahead_frames = 0;
  std::size_t chunk_frames = 0;

  std::size_t samples_in = 0;
  std::size_t samples_out = 0;
  std::size_t frames_processed = 0;
  std::size_t chunks_processed = 0;
  // Wall clock per network chunk, milliseconds.
  double chunk_ms_mean = 0.0;
  double chunk_ms_min = 0.0;
  double chunk_ms_max = 0.0;
  double total_compute_s = 0.0;
  double real_time_factor = 0.0;

  std::size_t state_bytes = 0;
  std::size_t peak_state_bytes = 0;

  std::string to_text() const;
  std::string to_json() const;
};

// Bytes of stream state implied by a config: input ring, frame queue, TCN
// caches, combine cache and overlap-add accumulators.
std::size_t stream_state_bytes(const ModelConfig& config, std::size_t chunk_frames,
                               std::size_t scalar_bytes);

template <typename T>
class StreamState {
 public:
  // The model must outlive the state. Throws ConfigError for non-causal
  // configs and chunk_frames == 0.
  StreamState(const Model<T>& model, std::size_t chunk_frames);

  // Buffers `samples` and returns every output sample that became final.
  std::vector<T> push(std::span<const T> samples);

  struct Flushed {
    std::vector<T> tail;
    LatencyReport report;
  };
  // Runs the remaining frames with the right-edge reflection and drains the
  // accumulator. The state is terminal afterwards.
  Flushed flush();

  bool flushed() const { return flushed_; }
  std::size_t frames_processed() const { return frames_done_; }
  std::size_t samples_in() const { return received_; }
  std::size_t samples_out() const { return emitted_; }
  // Bytes currently held by the state's buffers.
  std::size_t state_bytes() const;
  const ModelConfig& config() const { return config_; }

 private:
  T sample(std::size_t index) const;
  // Largest input index frame t reads, before any right-edge reflection.
  std::size_t frame_needs(std::size_t t) const;
  void queue_frame(std::size_t t, std::size_t total_len);
  // Runs the queued frames and emits output up to sample `limit`.
  void run_chunk(std::vector<T>& out, std::size_t limit);
  void synthesize(const Tensor<T>& out, std::size_t column, std::size_t columns);
  void emit_until(std::size_t end, std::vector<T>& out);

  const Model<T>* model_;
  ModelConfig config_;
  std::size_t chunk_frames_;
  std::size_t fft_, hop_, pad_, bins_;
  std::vector<T> window_;

  // Last fft_size input samples; absolute index i lives at i % fft_size.
  std::vector<T> ring_;
  std::size_t received_ = 0;

  // Features of frames waiting for a full chunk, [chunk_frames, 3, F].
  Tensor<T> queue_;
  std::size_t queued_ = 0;
  std::size_t frames_queued_ = 0;
  std::size_t frames_done_ = 0;

  // Per TCN layer, the last dilation * (kernel - 1) inputs: [L, d, span].
  std::vector<Tensor<T>> tcn_cache_;
  // Last combine_kernel - 1 decoded frames: [1, 4, F, k - 1].
  Tensor<T> combine_cache_;

  // Overlap-add numerator and window-energy accumulators for output samples
  // [emitted_, emitted_ + fft_size).
  std::vector<T> ola_;
  std::vector<T> ola_norm_;
  std::size_t emitted_ = 0;
  std::size_t synthesized_ = 0;

  bool flushed_ = false;
  std::size_t chunks_ = 0;
  double chunk_ms_sum_ = 0.0, chunk_ms_min_ = 0.0, chunk_ms_max_ = 0.0;
  std::size_t peak_bytes_ = 0;
};

template <typename T>
StreamState<T> create_stream(const Model<T>& model, std::size_t chunk_frames = 1);

// One chunking pattern: push sizes cycled until the input is consumed, and
// the number of frames batched per network call.
struct Chunking {
  std::vector<std::size_t> pushes;
  std::size_t chunk_frames = 1;
};

// Push sizes covering the adversarial cases: single samples, primes around
// the hop, whole hops, and one large block.
std::vector<Chunking> standard_chunkings(const ModelConfig& config);

// Streams `wave` through every chunking and returns the largest absolute
// difference from the offline forward pass (and from the input length).
// Throws ConfigError for non-causal models before computing anything.
template <typename T>
double equivalence_check(const Model<T>& model, std::span<const T> wave,
                         const std::vector<Chunking>& chunkings);

// Streams a whole signal with a single pattern.
template <typename T>
std::vector<T> stream_all(const Model<T>& model, std::span<const T> wave,
                          const Chunking& chunking, LatencyReport* report = nullptr);

}  // namespace dronese
