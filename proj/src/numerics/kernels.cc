// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/numerics/kernels.h"

#include <cmath>
#include <limits>
#include <string>

#include "dronese/numerics/mac_counter.h"

namespace dronese {
namespace {

using std::size_t;
using std::to_string;

[[noreturn]] void shape_fail(const std::string& op, const std::string& what) {
  throw ShapeError(op + ": " + what);
}

struct Batched3 {
  size_t batch, channels, length;
};

Batched3 view3(const Shape& s, const std::string& op) {
  if (s.size() == 2) return {1, s[0], s[1]};
  if (s.size() == 3) return {s[0], s[1], s[2]};
  shape_fail(op, "input must be [C,L] or [B,C,L], got " + shape_string(s));
}

Shape with_batch(const Shape& in, size_t channels, size_t length) {
  if (in.size() == 2) return {channels, length};
  return {in[0], channels, length};
}

// Range of output positions o with 0 <= o * stride + offset < length.
void valid_range(std::ptrdiff_t offset, size_t stride, size_t length,
                 size_t out_len, size_t* begin, size_t* end) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto len = static_cast<std::ptrdiff_t>(length);
  std::ptrdiff_t b = offset >= 0 ? 0 : (-offset + s - 1) / s;
  std::ptrdiff_t e = len - 1 - offset < 0 ? 0 : (len - 1 - offset) / s + 1;
  e = std::min<std::ptrdiff_t>(e, static_cast<std::ptrdiff_t>(out_len));
  if (e < b) e = b;
  *begin = static_cast<size_t>(b);
  *end = static_cast<size_t>(e);
}

template <typename T>
void ensure_grad(Tensor<T>* g, const Shape& shape) {
  if (g && g->shape() != shape) {
    if (g->empty()) {
      *g = Tensor<T>(shape);
    } else {
      throw ShapeError("gradient buffer " + shape_string(g->shape()) +
                       " does not match " + shape_string(shape));
    }
  }
}

struct AxisView {
  size_t outer, n, inner;
};

AxisView axis_view(const Shape& s, size_t axis, const std::string& op) {
  if (axis >= s.size()) {
    shape_fail(op, "axis " + to_string(axis) + " out of range for " +
                       shape_string(s));
  }
  AxisView v{1, s[axis], 1};
  for (size_t i = 0; i < axis; ++i) v.outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

size_t conv1d_output_length(size_t length, size_t kernel,
                            const Conv1dSpec& spec) {
  if (kernel < 1 || spec.stride < 1 || spec.dilation < 1) {
    throw ConfigError("conv1d: kernel, stride and dilation must be >= 1");
  }
  const size_t padded = length + spec.pad_left + spec.pad_right;
  const size_t extent = spec.dilation * (kernel - 1) + 1;
  if (padded < extent) {
    throw ShapeError("conv1d: padded length " + to_string(padded) +
                     " shorter than kernel extent " + to_string(extent));
  }
  return (padded - extent) / spec.stride + 1;
}

size_t conv1d_transposed_output_length(size_t length, size_t kernel,
                                       const ConvTranspose1dSpec& spec) {
  if (kernel < 1 || spec.stride < 1 || length < 1) {
    throw ConfigError("conv1d_transposed: kernel, stride, length must be >= 1");
  }
  const size_t full = (length - 1) * spec.stride + kernel;
  if (spec.crop_left + spec.crop_right >= full) {
    throw ShapeError("conv1d_transposed: crop " +
                     to_string(spec.crop_left + spec.crop_right) +
                     " consumes full output length " + to_string(full));
  }
  return full - spec.crop_left - spec.crop_right;
}

size_t AttentionMask::attended_pairs() const {
  size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

size_t AttentionMask::row_count(size_t i) const {
  size_t n = 0;
  for (size_t j = 0; j < size_; ++j) n += bits_[i * size_ + j];
  return n;
}

// ---------------------------------------------------------------- conv1d

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 const Conv1dSpec& spec) {
  const auto in = view3(x.shape(), "conv1d");
  if (w.rank() != 3) shape_fail("conv1d", "weight must be [C_out,C_in,K]");
  const size_t cout = w.dim(0), kern = w.dim(2);
  if (w.dim(1) != in.channels) {
    shape_fail("conv1d", "input channel axis " + to_string(in.channels) +
                             " != weight C_in axis " + to_string(w.dim(1)));
  }
  if (!b.empty() && b.size() != cout) {
    shape_fail("conv1d", "bias length " + to_string(b.size()) +
                             " != weight C_out axis " + to_string(cout));
  }
  const size_t lout = conv1d_output_length(in.length, kern, spec);
  Tensor<T> y(with_batch(x.shape(), cout, lout));
  const T* xd = x.data();
  const T* wd = w.data();
  T* yd = y.data();
  for (size_t bi = 0; bi < in.batch; ++bi) {
    for (size_t co = 0; co < cout; ++co) {
      T* yrow = yd + (bi * cout + co) * lout;
      const T bias = b.empty() ? T(0) : b[co];
      for (size_t o = 0; o < lout; ++o) yrow[o] = bias;
      for (size_t ci = 0; ci < in.channels; ++ci) {
        const T* xrow = xd + (bi * in.channels + ci) * in.length;
        const T* wrow = wd + (co * in.channels + ci) * kern;
        for (size_t k = 0; k < kern; ++k) {
          const auto off = static_cast<std::ptrdiff_t>(k * spec.dilation) -
                           static_cast<std::ptrdiff_t>(spec.pad_left);
          size_t ob, oe;
          valid_range(off, spec.stride, in.length, lout, &ob, &oe);
          const T wk = wrow[k];
          for (size_t o = ob; o < oe; ++o) {
            yrow[o] += wk * xrow[static_cast<std::ptrdiff_t>(o * spec.stride) + off];
          }
        }
      }
    }
  }
  record_macs(static_cast<std::uint64_t>(in.batch) * cout * in.channels *
              kern * lout);
  return y;
}

template <typename T>
void conv1d_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& gy, const Conv1dSpec& spec,
                     Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const auto in = view3(x.shape(), "conv1d_backward");
  const size_t cout = w.dim(0), kern = w.dim(2);
  const size_t lout = conv1d_output_length(in.length, kern, spec);
  if (gy.shape() != with_batch(x.shape(), cout, lout)) {
    shape_fail("conv1d_backward", "output grad shape " +
                                      shape_string(gy.shape()) + " mismatch");
  }
  ensure_grad(gx, x.shape());
  ensure_grad(gw, w.shape());
  if (gb) ensure_grad(gb, Shape{cout});
  for (size_t bi = 0; bi < in.batch; ++bi) {
    for (size_t co = 0; co < cout; ++co) {
      const T* grow = gy.data() + (bi * cout + co) * lout;
      if (gb) {
        T s = 0;
        for (size_t o = 0; o < lout; ++o) s += grow[o];
        (*gb)[co] += s;
      }
      for (size_t ci = 0; ci < in.channels; ++ci) {
        const size_t xoff = (bi * in.channels + ci) * in.length;
        const size_t woff = (co * in.channels + ci) * kern;
        for (size_t k = 0; k < kern; ++k) {
          const auto off = static_cast<std::ptrdiff_t>(k * spec.dilation) -
                           static_cast<std::ptrdiff_t>(spec.pad_left);
          size_t ob, oe;
          valid_range(off, spec.stride, in.length, lout, &ob, &oe);
          if (gw) {
            T s = 0;
            for (size_t o = ob; o < oe; ++o) {
              s += grow[o] * x[xoff + static_cast<std::ptrdiff_t>(o * spec.stride) + off];
            }
            (*gw)[woff + k] += s;
          }
          if (gx) {
            const T wk = w[woff + k];
            T* gxrow = gx->data() + xoff;
            for (size_t o = ob; o < oe; ++o) {
              gxrow[static_cast<std::ptrdiff_t>(o * spec.stride) + off] += wk * grow[o];
            }
          }
        }
      }
    }
  }
}

// ------------------------------------------------------ conv1d_transposed

template <typename T>
Tensor<T> conv1d_transposed(const Tensor<T>& x, const Tensor<T>& w,
                            const Tensor<T>& b,
                            const ConvTranspose1dSpec& spec) {
  const auto in = view3(x.shape(), "conv1d_transposed");
  if (w.rank() != 3) {
    shape_fail("conv1d_transposed", "weight must be [C_in,C_out,K]");
  }
  if (w.dim(0) != in.channels) {
    shape_fail("conv1d_transposed",
               "input channel axis " + to_string(in.channels) +
                   " != weight C_in axis " + to_string(w.dim(0)));
  }
  const size_t cout = w.dim(1), kern = w.dim(2);
  if (!b.empty() && b.size() != cout) {
    shape_fail("conv1d_transposed", "bias length mismatch with C_out axis");
  }
  const size_t lout = conv1d_transposed_output_length(in.length, kern, spec);
  Tensor<T> y(with_batch(x.shape(), cout, lout));
  for (size_t bi = 0; bi < in.batch; ++bi) {
    for (size_t co = 0; co < cout; ++co) {
      T* yrow = y.data() + (bi * cout + co) * lout;
      const T bias = b.empty() ? T(0) : b[co];
      for (size_t o = 0; o < lout; ++o) yrow[o] = bias;
      for (size_t ci = 0; ci < in.channels; ++ci) {
        const T* xrow = x.data() + (bi * in.channels + ci) * in.length;
        const T* wrow = w.data() + (ci * cout + co) * kern;
        for (size_t k = 0; k < kern; ++k) {
          const T wk = wrow[k];
          for (size_t i = 0; i < in.length; ++i) {
            const auto o = static_cast<std::ptrdiff_t>(i * spec.stride + k) -
                           static_cast<std::ptrdiff_t>(spec.crop_left);
            if (o < 0 || o >= static_cast<std::ptrdiff_t>(lout)) continue;
            yrow[o] += wk * xrow[i];
          }
        }
      }
    }
  }
  record_macs(static_cast<std::uint64_t>(in.batch) * cout * in.channels *
              kern * in.length);
  return y;
}

template <typename T>
void conv1d_transposed_backward(const Tensor<T>& x, const Tensor<T>& w,
                                const Tensor<T>& gy,
                                const ConvTranspose1dSpec& spec, Tensor<T>* gx,
                                Tensor<T>* gw, Tensor<T>* gb) {
  const auto in = view3(x.shape(), "conv1d_transposed_backward");
  const size_t cout = w.dim(1), kern = w.dim(2);
  const size_t lout = conv1d_transposed_output_length(in.length, kern, spec);
  if (gy.shape() != with_batch(x.shape(), cout, lout)) {
    shape_fail("conv1d_transposed_backward", "output grad shape mismatch");
  }
  ensure_grad(gx, x.shape());
  ensure_grad(gw, w.shape());
  if (gb) ensure_grad(gb, Shape{cout});
  for (size_t bi = 0; bi < in.batch; ++bi) {
    for (size_t co = 0; co < cout; ++co) {
      const T* grow = gy.data() + (bi * cout + co) * lout;
      if (gb) {
        T s = 0;
        for (size_t o = 0; o < lout; ++o) s += grow[o];
        (*gb)[co] += s;
      }
      for (size_t ci = 0; ci < in.channels; ++ci) {
        const size_t xoff = (bi * in.channels + ci) * in.length;
        const size_t woff = (ci * cout + co) * kern;
        for (size_t k = 0; k < kern; ++k) {
          T sw = 0;
          const T wk = w[woff + k];
          for (size_t i = 0; i < in.length; ++i) {
            const auto o = static_cast<std::ptrdiff_t>(i * spec.stride + k) -
                           static_cast<std::ptrdiff_t>(spec.crop_left);
            if (o < 0 || o >= static_cast<std::ptrdiff_t>(lout)) continue;
            sw += grow[o] * x[xoff + i];
            if (gx) (*gx)[xoff + i] += wk * grow[o];
          }
          if (gw) (*gw)[woff + k] += sw;
        }
      }
    }
  }
}

// ---------------------------------------------------------------- conv2d

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 const Conv2dSpec& spec) {
  if (x.rank() != 4) shape_fail("conv2d", "input must be [B,C,H,W]");
  if (w.rank() != 4) shape_fail("conv2d", "weight must be [C_out,C_in,KH,KW]");
  const size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) {
    shape_fail("conv2d", "input channel axis " + to_string(cin) +
                             " != weight C_in axis " + to_string(w.dim(1)));
  }
  if (!b.empty() && b.size() != cout) {
    shape_fail("conv2d", "bias length mismatch with C_out axis");
  }
  const size_t hout = conv1d_output_length(
      h, kh, {spec.stride_h, 1, spec.pad_top, spec.pad_bottom});
  const size_t wout = conv1d_output_length(
      wd, kw, {spec.stride_w, 1, spec.pad_left, spec.pad_right});
  Tensor<T> y(Shape{batch, cout, hout, wout});
  for (size_t bi = 0; bi < batch; ++bi) {
    for (size_t co = 0; co < cout; ++co) {
      T* yplane = y.data() + (bi * cout + co) * hout * wout;
      const T bias = b.empty() ? T(0) : b[co];
      for (size_t i = 0; i < hout * wout; ++i) yplane[i] = bias;
      for (size_t ci = 0; ci < cin; ++ci) {
        const T* xplane = x.data() + (bi * cin + ci) * h * wd;
        for (size_t a = 0; a < kh; ++a) {
          for (size_t c = 0; c < kw; ++c) {
            const T wk = w[((co * cin + ci) * kh + a) * kw + c];
            const auto offh = static_cast<std::ptrdiff_t>(a) -
                              static_cast<std::ptrdiff_t>(spec.pad_top);
            const auto offw = static_cast<std::ptrdiff_t>(c) -
                              static_cast<std::ptrdiff_t>(spec.pad_left);
            size_t hb, he, wb, we;
            valid_range(offh, spec.stride_h, h, hout, &hb, &he);
            valid_range(offw, spec.stride_w, wd, wout, &wb, &we);
            for (size_t oh = hb; oh < he; ++oh) {
              const T* xrow =
                  xplane + (static_cast<std::ptrdiff_t>(oh * spec.stride_h) + offh) * wd;
              T* yrow = yplane + oh * wout;
              for (size_t ow = wb; ow < we; ++ow) {
                yrow[ow] += wk * xrow[static_cast<std::ptrdiff_t>(ow * spec.stride_w) + offw];
              }
            }
          }
        }
      }
    }
  }
  record_macs(static_cast<std::uint64_t>(batch) * cout * cin * kh * kw * hout *
              wout);
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& gy, const Conv2dSpec& spec,
                     Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const size_t hout = conv1d_output_length(
      h, kh, {spec.stride_h, 1, spec.pad_top, spec.pad_bottom});
  const size_t wout = conv1d_output_length(
      wd, kw, {spec.stride_w, 1, spec.pad_left, spec.pad_right});
  if (gy.shape() != Shape{batch, cout, hout, wout}) {
    shape_fail("conv2d_backward", "output grad shape mismatch");
  }
  ensure_grad(gx, x.shape());
  ensure_grad(gw, w.shape());
  if (gb) ensure_grad(gb, Shape{cout});
  for (size_t bi = 0; bi < batch; ++bi) {
    for (size_t co = 0; co < cout; ++co) {
      const T* gplane = gy.data() + (bi * cout + co) * hout * wout;
      if (gb) {
        T s = 0;
        for (size_t i = 0; i < hout * wout; ++i) s += gplane[i];
        (*gb)[co] += s;
      }
      for (size_t ci = 0; ci < cin; ++ci) {
        const size_t xoff = (bi * cin + ci) * h * wd;
        for (size_t a = 0; a < kh; ++a) {
          for (size_t c = 0; c < kw; ++c) {
            const size_t widx = ((co * cin + ci) * kh + a) * kw + c;
            const T wk = w[widx];
            const auto offh = static_cast<std::ptrdiff_t>(a) -
                              static_cast<std::ptrdiff_t>(spec.pad_top);
            const auto offw = static_cast<std::ptrdiff_t>(c) -
                              static_cast<std::ptrdiff_t>(spec.pad_left);
            size_t hb, he, wb, we;
            valid_range(offh, spec.stride_h, h, hout, &hb, &he);
            valid_range(offw, spec.stride_w, wd, wout, &wb, &we);
            T sw = 0;
            for (size_t oh = hb; oh < he; ++oh) {
              const size_t xrow =
                  xoff + (static_cast<std::ptrdiff_t>(oh * spec.stride_h) + offh) * wd;
              for (size_t ow = wb; ow < we; ++ow) {
                const size_t xi =
                    xrow + static_cast<std::ptrdiff_t>(ow * spec.stride_w) + offw;
                const T g = gplane[oh * wout + ow];
                sw += g * x[xi];
                if (gx) (*gx)[xi] += wk * g;
              }
            }
            if (gw) (*gw)[widx] += sw;
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------- linear

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() < 1) shape_fail("linear", "input must have rank >= 1");
  if (w.rank() != 2) shape_fail("linear", "weight must be [D_out,D_in]");
  const size_t din = x.shape().back(), dout = w.dim(0);
  if (w.dim(1) != din) {
    shape_fail("linear", "input trailing axis " + to_string(din) +
                             " != weight D_in axis " + to_string(w.dim(1)));
  }
  if (!b.empty() && b.size() != dout) {
    shape_fail("linear", "bias length mismatch with D_out axis");
  }
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  Tensor<T> y(out_shape);
  const size_t rows = x.size() / din;
  for (size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * din;
    T* yr = y.data() + r * dout;
    for (size_t o = 0; o < dout; ++o) {
      const T* wr = w.data() + o * din;
      T s = b.empty() ? T(0) : b[o];
      for (size_t i = 0; i < din; ++i) s += wr[i] * xr[i];
      yr[o] = s;
    }
  }
  record_macs(static_cast<std::uint64_t>(rows) * din * dout);
  return y;
}

template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gw,
                     Tensor<T>* gb) {
  const size_t din = x.shape().back(), dout = w.dim(0);
  const size_t rows = x.size() / din;
  if (gy.size() != rows * dout) {
    shape_fail("linear_backward", "output grad shape mismatch");
  }
  ensure_grad(gx, x.shape());
  ensure_grad(gw, w.shape());
  if (gb) ensure_grad(gb, Shape{dout});
  for (size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * din;
    const T* gr = gy.data() + r * dout;
    for (size_t o = 0; o < dout; ++o) {
      const T g = gr[o];
      if (gb) (*gb)[o] += g;
      if (gw) {
        T* gwr = gw->data() + o * din;
        for (size_t i = 0; i < din; ++i) gwr[i] += g * xr[i];
      }
      if (gx) {
        const T* wr = w.data() + o * din;
        T* gxr = gx->data() + r * din;
        for (size_t i = 0; i < din; ++i) gxr[i] += g * wr[i];
      }
    }
  }
}

// ------------------------------------------------------------- attention

template <typename T>
Tensor<T> masked_attention(const Tensor<T>& q, const Tensor<T>& k,
                           const Tensor<T>& v, std::size_t heads,
                           const AttentionMask& mask, Tensor<T>* probs) {
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    shape_fail("masked_attention", "q, k, v must share shape [B,L,d]; got " +
                                       shape_string(q.shape()) + ", " +
                                       shape_string(k.shape()) + ", " +
                                       shape_string(v.shape()));
  }
  const size_t batch = q.dim(0), len = q.dim(1), d = q.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("masked_attention: embedding dim " + to_string(d) +
                      " not divisible by heads " + to_string(heads));
  }
  if (mask.size() != len) {
    shape_fail("masked_attention", "mask size " + to_string(mask.size()) +
                                       " != sequence axis " + to_string(len));
  }
  for (size_t i = 0; i < len; ++i) {
    if (mask.row_count(i) == 0) {
      throw NumericError("masked_attention: query row " + to_string(i) +
                         " attends no key (degenerate softmax)");
    }
  }
  const size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Tensor<T> y(q.shape());
  Tensor<T> p(Shape{batch, heads, len, len});
  std::vector<T> row(len);
  for (size_t bi = 0; bi < batch; ++bi) {
    for (size_t hh = 0; hh < heads; ++hh) {
      for (size_t i = 0; i < len; ++i) {
        const T* qi = q.data() + (bi * len + i) * d + hh * dh;
        T mx = -std::numeric_limits<T>::infinity();
        for (size_t j = 0; j < len; ++j) {
          if (!mask(i, j)) continue;
          const T* kj = k.data() + (bi * len + j) * d + hh * dh;
          T s = 0;
          for (size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          row[j] = s * scale;
          mx = std::max(mx, row[j]);
        }
        T denom = 0;
        for (size_t j = 0; j < len; ++j) {
          if (!mask(i, j)) continue;
          row[j] = std::exp(row[j] - mx);
          denom += row[j];
        }
        T* prow = p.data() + ((bi * heads + hh) * len + i) * len;
        T* yi = y.data() + (bi * len + i) * d + hh * dh;
        for (size_t j = 0; j < len; ++j) {
          if (!mask(i, j)) continue;
          const T pij = row[j] / denom;
          prow[j] = pij;
          const T* vj = v.data() + (bi * len + j) * d + hh * dh;
          for (size_t c = 0; c < dh; ++c) yi[c] += pij * vj[c];
        }
      }
    }
  }
  const std::uint64_t pair_macs =
      static_cast<std::uint64_t>(batch) * mask.attended_pairs() * d;
  record_macs("qk", pair_macs);
  record_macs("av", pair_macs);
  if (probs) *probs = std::move(p);
  return y;
}

template <typename T>
void masked_attention_backward(const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, const Tensor<T>& probs,
                               std::size_t heads, const AttentionMask& mask,
                               const Tensor<T>& gy, Tensor<T>* gq,
                               Tensor<T>* gk, Tensor<T>* gv) {
  const size_t batch = q.dim(0), len = q.dim(1), d = q.dim(2);
  const size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  ensure_grad(gq, q.shape());
  ensure_grad(gk, k.shape());
  ensure_grad(gv, v.shape());
  std::vector<T> dp(len);
  for (size_t bi = 0; bi < batch; ++bi) {
    for (size_t hh = 0; hh < heads; ++hh) {
      for (size_t i = 0; i < len; ++i) {
        const T* prow = probs.data() + ((bi * heads + hh) * len + i) * len;
        const T* gyi = gy.data() + (bi * len + i) * d + hh * dh;
        T dot = 0;
        for (size_t j = 0; j < len; ++j) {
          if (!mask(i, j)) continue;
          const T* vj = v.data() + (bi * len + j) * d + hh * dh;
          T s = 0;
          for (size_t c = 0; c < dh; ++c) s += gyi[c] * vj[c];
          dp[j] = s;
          dot += s * prow[j];
          if (gv) {
            T* gvj = gv->data() + (bi * len + j) * d + hh * dh;
            for (size_t c = 0; c < dh; ++c) gvj[c] += prow[j] * gyi[c];
          }
        }
        const T* qi = q.data() + (bi * len + i) * d + hh * dh;
        for (size_t j = 0; j < len; ++j) {
          if (!mask(i, j)) continue;
          const T ds = prow[j] * (dp[j] - dot) * scale;
          const T* kj = k.data() + (bi * len + j) * d + hh * dh;
          if (gq) {
            T* gqi = gq->data() + (bi * len + i) * d + hh * dh;
            for (size_t c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
          }
          if (gk) {
            T* gkj = gk->data() + (bi * len + j) * d + hh * dh;
            for (size_t c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
          }
        }
      }
    }
  }
}

// ------------------------------------------------------------ layer_norm

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& shift, std::size_t axis, Tensor<T>* mean,
                     Tensor<T>* rstd) {
  const auto av = axis_view(x.shape(), axis, "layer_norm");
  if (gain.size() != av.n || shift.size() != av.n) {
    shape_fail("layer_norm", "gain/shift length must equal normalized axis " +
                                 to_string(av.n));
  }
  Tensor<T> y(x.shape());
  Tensor<T> mu(Shape{av.outer * av.inner});
  Tensor<T> rs(Shape{av.outer * av.inner});
  for (size_t o = 0; o < av.outer; ++o) {
    for (size_t in = 0; in < av.inner; ++in) {
      const size_t base = o * av.n * av.inner + in;
      T m = 0;
      for (size_t i = 0; i < av.n; ++i) m += x[base + i * av.inner];
      m /= static_cast<T>(av.n);
      T var = 0;
      for (size_t i = 0; i < av.n; ++i) {
        const T c = x[base + i * av.inner] - m;
        var += c * c;
      }
      var /= static_cast<T>(av.n);
      const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
      for (size_t i = 0; i < av.n; ++i) {
        const size_t idx = base + i * av.inner;
        y[idx] = (x[idx] - m) * r * gain[i] + shift[i];
      }
      mu[o * av.inner + in] = m;
      rs[o * av.inner + in] = r;
    }
  }
  if (mean) *mean = std::move(mu);
  if (rstd) *rstd = std::move(rs);
  return y;
}

template <typename T>
void layer_norm_backward(const Tensor<T>& x, const Tensor<T>& gain,
                         const Tensor<T>& mean, const Tensor<T>& rstd,
                         const Tensor<T>& gy, std::size_t axis, Tensor<T>* gx,
                         Tensor<T>* ggain, Tensor<T>* gshift) {
  const auto av = axis_view(x.shape(), axis, "layer_norm_backward");
  ensure_grad(gx, x.shape());
  ensure_grad(ggain, gain.shape());
  ensure_grad(gshift, gain.shape());
  std::vector<T> xhat(av.n), dxhat(av.n);
  const T inv_n = T(1) / static_cast<T>(av.n);
  for (size_t o = 0; o < av.outer; ++o) {
    for (size_t in = 0; in < av.inner; ++in) {
      const size_t base = o * av.n * av.inner + in;
      const T m = mean[o * av.inner + in];
      const T r = rstd[o * av.inner + in];
      T mean_d = 0, mean_dx = 0;
      for (size_t i = 0; i < av.n; ++i) {
        const size_t idx = base + i * av.inner;
        xhat[i] = (x[idx] - m) * r;
        const T g = gy[idx];
        if (ggain) (*ggain)[i] += g * xhat[i];
        if (gshift) (*gshift)[i] += g;
        dxhat[i] = g * gain[i];
        mean_d += dxhat[i];
        mean_dx += dxhat[i] * xhat[i];
      }
      mean_d *= inv_n;
      mean_dx *= inv_n;
      if (gx) {
        for (size_t i = 0; i < av.n; ++i) {
          (*gx)[base + i * av.inner] += r * (dxhat[i] - mean_d - xhat[i] * mean_dx);
        }
      }
    }
  }
}

// ----------------------------------------------------------------- prelu

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope, std::size_t axis) {
  const auto av = axis_view(x.shape(), axis, "prelu");
  if (slope.size() != 1 && slope.size() != av.n) {
    shape_fail("prelu", "slope length " + to_string(slope.size()) +
                            " must be 1 or axis extent " + to_string(av.n));
  }
  Tensor<T> y(x.shape());
  for (size_t o = 0; o < av.outer; ++o) {
    for (size_t i = 0; i < av.n; ++i) {
      const T a = slope.size() == 1 ? slope[0] : slope[i];
      const size_t base = (o * av.n + i) * av.inner;
      for (size_t in = 0; in < av.inner; ++in) {
        const T v = x[base + in];
        y[base + in] = v > T(0) ? v : a * v;
      }
    }
  }
  return y;
}

template <typename T>
void prelu_backward(const Tensor<T>& x, const Tensor<T>& slope,
                    const Tensor<T>& gy, std::size_t axis, Tensor<T>* gx,
                    Tensor<T>* gslope) {
  const auto av = axis_view(x.shape(), axis, "prelu_backward");
  ensure_grad(gx, x.shape());
  ensure_grad(gslope, slope.shape());
  for (size_t o = 0; o < av.outer; ++o) {
    for (size_t i = 0; i < av.n; ++i) {
      const size_t si = slope.size() == 1 ? 0 : i;
      const T a = slope[si];
      const size_t base = (o * av.n + i) * av.inner;
      T sa = 0;
      for (size_t in = 0; in < av.inner; ++in) {
        const T v = x[base + in];
        const T g = gy[base + in];
        if (v > T(0)) {
          if (gx) (*gx)[base + in] += g;
        } else {
          if (gx) (*gx)[base + in] += a * g;
          sa += g * v;
        }
      }
      if (gslope) (*gslope)[si] += sa;
    }
  }
}

// --------------------------------------------------------------- sigmoid

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    // Split on sign so exp never overflows.
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  return y;
}

template <typename T>
void sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>* gx) {
  ensure_grad(gx, y.shape());
  if (!gx) return;
  for (size_t i = 0; i < y.size(); ++i) (*gx)[i] += gy[i] * y[i] * (T(1) - y[i]);
}

// --------------------------------------------------------------- dropout

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool train,
                  std::mt19937_64& rng, Tensor<T>* keep) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " +
                      std::to_string(rate));
  }
  if (!train || rate == 0.0) {
    if (keep) *keep = Tensor<T>();
    return x;
  }
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const T s = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> m(x.shape());
  Tensor<T> y(x.shape());
  for (size_t i = 0; i < x.size(); ++i) {
    m[i] = uni(rng) >= rate ? s : T(0);
    y[i] = x[i] * m[i];
  }
  if (keep) *keep = std::move(m);
  return y;
}

// ----------------------------------------------------------- scale_along

template <typename T>
Tensor<T> scale_along(const Tensor<T>& x, const Tensor<T>& v,
                      std::size_t axis) {
  const auto av = axis_view(x.shape(), axis, "scale_along");
  if (v.size() != av.n) {
    shape_fail("scale_along", "scale length " + to_string(v.size()) +
                                  " != axis extent " + to_string(av.n));
  }
  Tensor<T> y(x.shape());
  for (size_t o = 0; o < av.outer; ++o) {
    for (size_t i = 0; i < av.n; ++i) {
      const size_t base = (o * av.n + i) * av.inner;
      for (size_t in = 0; in < av.inner; ++in) y[base + in] = x[base + in] * v[i];
    }
  }
  return y;
}

template <typename T>
void scale_along_backward(const Tensor<T>& x, const Tensor<T>& v,
                          const Tensor<T>& gy, std::size_t axis, Tensor<T>* gx,
                          Tensor<T>* gv) {
  const auto av = axis_view(x.shape(), axis, "scale_along_backward");
  ensure_grad(gx, x.shape());
  ensure_grad(gv, v.shape());
  for (size_t o = 0; o < av.outer; ++o) {
    for (size_t i = 0; i < av.n; ++i) {
      const size_t base = (o * av.n + i) * av.inner;
      T s = 0;
      for (size_t in = 0; in < av.inner; ++in) {
        if (gx) (*gx)[base + in] += gy[base + in] * v[i];
        s += gy[base + in] * x[base + in];
      }
      if (gv) (*gv)[i] += s;
    }
  }
}

// ------------------------------------------------------------ structural

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  const size_t r = x.rank();
  if (perm.size() != r) shape_fail("permute", "permutation rank mismatch");
  std::vector<bool> seen(r, false);
  for (size_t p : perm) {
    if (p >= r || seen[p]) shape_fail("permute", "invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(r);
  for (size_t i = 0; i < r; ++i) out_shape[i] = x.dim(perm[i]);
  // Input strides, reordered to follow output axes.
  std::vector<size_t> in_stride(r, 1);
  for (size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.dim(i);
  std::vector<size_t> stride(r);
  for (size_t i = 0; i < r; ++i) stride[i] = in_stride[perm[i]];
  Tensor<T> y(out_shape);
  std::vector<size_t> idx(r, 0);
  size_t src = 0;
  for (size_t n = 0; n < y.size(); ++n) {
    y[n] = x[src];
    for (size_t a = r; a-- > 0;) {
      ++idx[a];
      src += stride[a];
      if (idx[a] < out_shape[a]) break;
      src -= stride[a] * out_shape[a];
      idx[a] = 0;
    }
  }
  return y;
}

template <typename T>
Tensor<T> concat(const std::vector<const Tensor<T>*>& parts,
                 std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  Shape out_shape = parts.front()->shape();
  if (axis >= out_shape.size()) shape_fail("concat", "axis out of range");
  size_t total = 0;
  for (const auto* p : parts) {
    const Shape& s = p->shape();
    if (s.size() != out_shape.size()) shape_fail("concat", "rank mismatch");
    for (size_t a = 0; a < s.size(); ++a) {
      if (a != axis && s[a] != out_shape[a]) {
        shape_fail("concat", "axis " + to_string(a) + " extent " +
                                 to_string(s[a]) + " != " +
                                 to_string(out_shape[a]));
      }
    }
    total += s[axis];
  }
  out_shape[axis] = total;
  Tensor<T> y(out_shape);
  const auto av = axis_view(out_shape, axis, "concat");
  size_t offset = 0;
  for (const auto* p : parts) {
    const size_t n = p->dim(axis);
    for (size_t o = 0; o < av.outer; ++o) {
      std::copy_n(p->data() + o * n * av.inner, n * av.inner,
                  y.data() + (o * av.n + offset) * av.inner);
    }
    offset += n;
  }
  return y;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin,
                std::size_t end) {
  const auto av = axis_view(x.shape(), axis, "slice");
  if (begin > end || end > av.n) {
    shape_fail("slice", "range [" + to_string(begin) + "," + to_string(end) +
                            ") outside axis " + to_string(axis) + " extent " +
                            to_string(av.n));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  Tensor<T> y(out_shape);
  const size_t n = end - begin;
  for (size_t o = 0; o < av.outer; ++o) {
    std::copy_n(x.data() + (o * av.n + begin) * av.inner, n * av.inner,
                y.data() + o * n * av.inner);
  }
  return y;
}

template <typename T>
void slice_backward(const Tensor<T>& g, std::size_t axis, std::size_t begin,
                    Tensor<T>* target) {
  const auto av = axis_view(target->shape(), axis, "slice_backward");
  const size_t n = g.dim(axis);
  for (size_t o = 0; o < av.outer; ++o) {
    const T* src = g.data() + o * n * av.inner;
    T* dst = target->data() + (o * av.n + begin) * av.inner;
    for (size_t i = 0; i < n * av.inner; ++i) dst[i] += src[i];
  }
}

#define DRONESE_INSTANTIATE_KERNELS(T)                                          \
  template Tensor<T> conv1d(const Tensor<T>&, const Tensor<T>&,                \
                            const Tensor<T>&, const Conv1dSpec&);              \
  template void conv1d_backward(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, const Conv1dSpec&,           \
                                Tensor<T>*, Tensor<T>*, Tensor<T>*);           \
  template Tensor<T> conv1d_transposed(const Tensor<T>&, const Tensor<T>&,     \
                                       const Tensor<T>&,                       \
                                       const ConvTranspose1dSpec&);            \
  template void conv1d_transposed_backward(                                    \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                    \
      const ConvTranspose1dSpec&, Tensor<T>*, Tensor<T>*, Tensor<T>*);         \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&,                \
                            const Tensor<T>&, const Conv2dSpec&);              \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, const Conv2dSpec&,           \
                                Tensor<T>*, Tensor<T>*, Tensor<T>*);           \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&,                \
                            const Tensor<T>&);                                 \
  template void linear_backward(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, Tensor<T>*, Tensor<T>*,      \
                                Tensor<T>*);                                   \
  template Tensor<T> masked_attention(const Tensor<T>&, const Tensor<T>&,      \
                                      const Tensor<T>&, std::size_t,           \
                                      const AttentionMask&, Tensor<T>*);       \
  template void masked_attention_backward(                                     \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
      std::size_t, const AttentionMask&, const Tensor<T>&, Tensor<T>*,         \
      Tensor<T>*, Tensor<T>*);                                                 \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, std::size_t, Tensor<T>*,     \
                                Tensor<T>*);                                   \
  template void layer_norm_backward(                                           \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
      const Tensor<T>&, std::size_t, Tensor<T>*, Tensor<T>*, Tensor<T>*);      \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&, std::size_t);   \
  template void prelu_backward(const Tensor<T>&, const Tensor<T>&,             \
                               const Tensor<T>&, std::size_t, Tensor<T>*,      \
                               Tensor<T>*);                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                \
  template void sigmoid_backward(const Tensor<T>&, const Tensor<T>&,           \
                                 Tensor<T>*);                                  \
  template Tensor<T> dropout(const Tensor<T>&, double, bool,                   \
                             std::mt19937_64&, Tensor<T>*);                    \
  template Tensor<T> scale_along(const Tensor<T>&, const Tensor<T>&,           \
                                 std::size_t);                                 \
  template void scale_along_backward(const Tensor<T>&, const Tensor<T>&,       \
                                     const Tensor<T>&, std::size_t,            \
                                     Tensor<T>*, Tensor<T>*);                  \
  template Tensor<T> permute(const Tensor<T>&,                                 \
                             const std::vector<std::size_t>&);                 \
  template Tensor<T> concat(const std::vector<const Tensor<T>*>&,              \
                            std::size_t);                                      \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t,         \
                           std::size_t);                                       \
  template void slice_backward(const Tensor<T>&, std::size_t, std::size_t,     \
                               Tensor<T>*);

DRONESE_INSTANTIATE_KERNELS(float)
DRONESE_INSTANTIATE_KERNELS(double)

#undef DRONESE_INSTANTIATE_KERNELS

}  // namespace dronese
