// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Dense kernels with analytic backward passes.
//
// Layout conventions: 1-D convolutions take [B, C, L] (or unbatched [C, L]),
// 2-D convolutions take [B, C, H, W], linear maps act on the trailing axis.
// Backward functions accumulate into the gradient tensors they are given and
// skip any that are null. Bias tensors may be empty, meaning "no bias".

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "dronese/numerics/tensor.h"

namespace dronese {

struct Conv1dSpec {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
};

// Transposed convolution: the full scatter output of length
// (L_in - 1) * stride + K is cropped by crop_left / crop_right.
struct ConvTranspose1dSpec {
  std::size_t stride = 1;
  std::size_t crop_left = 0;
  std::size_t crop_right = 0;
};

struct Conv2dSpec {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_top = 0;
  std::size_t pad_bottom = 0;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
};

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel,
                                 const Conv1dSpec& spec);
std::size_t conv1d_transposed_output_length(std::size_t length,
                                            std::size_t kernel,
                                            const ConvTranspose1dSpec& spec);

// Square boolean matrix; entry (i, j) true when query i may attend key j.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t size, bool fill = false)
      : size_(size), bits_(size * size, fill ? 1 : 0) {}

  std::size_t size() const { return size_; }
  bool operator()(std::size_t i, std::size_t j) const {
    return bits_[i * size_ + j] != 0;
  }
  void set(std::size_t i, std::size_t j, bool v) {
    bits_[i * size_ + j] = v ? 1 : 0;
  }
  std::size_t attended_pairs() const;
  std::size_t row_count(std::size_t i) const;
  bool operator==(const AttentionMask&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint8_t> bits_;
};

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 const Conv1dSpec& spec);
template <typename T>
void conv1d_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& gy, const Conv1dSpec& spec,
                     Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb);

// Weight layout [C_in, C_out, K]: with the same weight tensor this is the
// adjoint of conv1d when crop_left equals the forward pad_left.
template <typename T>
Tensor<T> conv1d_transposed(const Tensor<T>& x, const Tensor<T>& w,
                            const Tensor<T>& b,
                            const ConvTranspose1dSpec& spec);
template <typename T>
void conv1d_transposed_backward(const Tensor<T>& x, const Tensor<T>& w,
                                const Tensor<T>& gy,
                                const ConvTranspose1dSpec& spec, Tensor<T>* gx,
                                Tensor<T>* gw, Tensor<T>* gb);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 const Conv2dSpec& spec);
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& gy, const Conv2dSpec& spec,
                     Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb);

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gw,
                     Tensor<T>* gb);

// Scaled dot-product attention over already-projected q, k, v of shape
// [B, L, d]; heads split d into contiguous slices. Masked pairs are
// excluded from the softmax reduction and get exactly zero weight. The
// per-head probabilities [B, H, L, L] are written to `probs` for backward.
template <typename T>
Tensor<T> masked_attention(const Tensor<T>& q, const Tensor<T>& k,
                           const Tensor<T>& v, std::size_t heads,
                           const AttentionMask& mask, Tensor<T>* probs);
template <typename T>
void masked_attention_backward(const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, const Tensor<T>& probs,
                               std::size_t heads, const AttentionMask& mask,
                               const Tensor<T>& gy, Tensor<T>* gq,
                               Tensor<T>* gk, Tensor<T>* gv);

inline constexpr double kLayerNormEps = 1e-5;

// Normalizes over `axis`; gain and shift have extent dim(axis).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& shift, std::size_t axis,
                     Tensor<T>* mean, Tensor<T>* rstd);
template <typename T>
void layer_norm_backward(const Tensor<T>& x, const Tensor<T>& gain,
                         const Tensor<T>& mean, const Tensor<T>& rstd,
                         const Tensor<T>& gy, std::size_t axis, Tensor<T>* gx,
                         Tensor<T>* ggain, Tensor<T>* gshift);

// Slope is either a single value or one value per index of `axis`.
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope, std::size_t axis);
template <typename T>
void prelu_backward(const Tensor<T>& x, const Tensor<T>& slope,
                    const Tensor<T>& gy, std::size_t axis, Tensor<T>* gx,
                    Tensor<T>* gslope);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
// Uses the forward output y.
template <typename T>
void sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>* gx);

// Inverted dropout. Identity (and `keep` left empty) when not training.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool train,
                  std::mt19937_64& rng, Tensor<T>* keep);

// x * v broadcast along `axis` (v has extent dim(axis)).
template <typename T>
Tensor<T> scale_along(const Tensor<T>& x, const Tensor<T>& v, std::size_t axis);
template <typename T>
void scale_along_backward(const Tensor<T>& x, const Tensor<T>& v,
                          const Tensor<T>& gy, std::size_t axis, Tensor<T>* gx,
                          Tensor<T>* gv);

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm);
template <typename T>
Tensor<T> concat(const std::vector<const Tensor<T>*>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin,
                std::size_t end);
// Adds g into the [begin, end) window of `target` along axis.
template <typename T>
void slice_backward(const Tensor<T>& g, std::size_t axis, std::size_t begin,
                    Tensor<T>* target);

}  // namespace dronese
