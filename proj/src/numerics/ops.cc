// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/numerics/ops.h"

#include <numeric>

namespace dronese::ops {
namespace {

template <typename T>
const Tensor<T>& empty_tensor() {
  static const Tensor<T> empty;
  return empty;
}

template <typename T>
const Tensor<T>& value_or_empty(const Tape<T>& tape, Var v) {
  return v.valid() ? tape.value(v) : empty_tensor<T>();
}

template <typename T>
Tensor<T>* grad_if(Tape<T>& tape, Var v) {
  return v.valid() && tape.requires_grad(v) ? &tape.grad(v) : nullptr;
}

}  // namespace

template <typename T>
Var conv1d(Tape<T>& tape, Var x, Var w, Var b, const Conv1dSpec& spec) {
  Tensor<T> y = dronese::conv1d(tape.value(x), tape.value(w),
                                value_or_empty(tape, b), spec);
  Var bb = b.valid() ? b : x;
  return tape.push(
      std::move(y), {x, w, bb},
      [x, w, b, spec](Tape<T>& t, const Tensor<T>& g) {
        conv1d_backward(t.value(x), t.value(w), g, spec, grad_if(t, x),
                        grad_if(t, w), grad_if(t, b));
      },
      "conv1d");
}

template <typename T>
Var conv1d_transposed(Tape<T>& tape, Var x, Var w, Var b,
                      const ConvTranspose1dSpec& spec) {
  Tensor<T> y = dronese::conv1d_transposed(tape.value(x), tape.value(w),
                                           value_or_empty(tape, b), spec);
  Var bb = b.valid() ? b : x;
  return tape.push(
      std::move(y), {x, w, bb},
      [x, w, b, spec](Tape<T>& t, const Tensor<T>& g) {
        conv1d_transposed_backward(t.value(x), t.value(w), g, spec,
                                   grad_if(t, x), grad_if(t, w),
                                   grad_if(t, b));
      },
      "conv1d_transposed");
}

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var b, const Conv2dSpec& spec) {
  Tensor<T> y = dronese::conv2d(tape.value(x), tape.value(w),
                                value_or_empty(tape, b), spec);
  Var bb = b.valid() ? b : x;
  return tape.push(
      std::move(y), {x, w, bb},
      [x, w, b, spec](Tape<T>& t, const Tensor<T>& g) {
        conv2d_backward(t.value(x), t.value(w), g, spec, grad_if(t, x),
                        grad_if(t, w), grad_if(t, b));
      },
      "conv2d");
}

template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var b) {
  Tensor<T> y =
      dronese::linear(tape.value(x), tape.value(w), value_or_empty(tape, b));
  Var bb = b.valid() ? b : x;
  return tape.push(
      std::move(y), {x, w, bb},
      [x, w, b](Tape<T>& t, const Tensor<T>& g) {
        linear_backward(t.value(x), t.value(w), g, grad_if(t, x),
                        grad_if(t, w), grad_if(t, b));
      },
      "linear");
}

template <typename T>
Var attention(Tape<T>& tape, Var q, Var k, Var v, std::size_t heads,
              const AttentionMask& mask) {
  Tensor<T> probs;
  const bool keep = tape.recording();
  Tensor<T> y = masked_attention(tape.value(q), tape.value(k), tape.value(v),
                                 heads, mask, keep ? &probs : nullptr);
  return tape.push(
      std::move(y), {q, k, v},
      [q, k, v, heads, mask, probs = std::move(probs)](Tape<T>& t,
                                                       const Tensor<T>& g) {
        masked_attention_backward(t.value(q), t.value(k), t.value(v), probs,
                                  heads, mask, g, grad_if(t, q), grad_if(t, k),
                                  grad_if(t, v));
      },
      "attention");
}

template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var gain, Var shift, std::size_t axis) {
  Tensor<T> mean, rstd;
  Tensor<T> y = dronese::layer_norm(tape.value(x), tape.value(gain),
                                    tape.value(shift), axis, &mean, &rstd);
  return tape.push(
      std::move(y), {x, gain, shift},
      [x, gain, shift, axis, mean = std::move(mean), rstd = std::move(rstd)](
          Tape<T>& t, const Tensor<T>& g) {
        layer_norm_backward(t.value(x), t.value(gain), mean, rstd, g, axis,
                            grad_if(t, x), grad_if(t, gain),
                            grad_if(t, shift));
      },
      "layer_norm");
}

template <typename T>
Var prelu(Tape<T>& tape, Var x, Var slope, std::size_t axis) {
  Tensor<T> y = dronese::prelu(tape.value(x), tape.value(slope), axis);
  return tape.push(
      std::move(y), {x, slope},
      [x, slope, axis](Tape<T>& t, const Tensor<T>& g) {
        prelu_backward(t.value(x), t.value(slope), g, axis, grad_if(t, x),
                       grad_if(t, slope));
      },
      "prelu");
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  Tensor<T> y = dronese::sigmoid(tape.value(x));
  Var out{static_cast<int>(tape.size())};
  return tape.push(
      std::move(y), {x},
      [x, out](Tape<T>& t, const Tensor<T>& g) {
        sigmoid_backward(t.value(out), g, grad_if(t, x));
      },
      "sigmoid");
}

template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, bool train,
            std::mt19937_64& rng) {
  Tensor<T> keep;
  Tensor<T> y = dronese::dropout(tape.value(x), rate, train, rng, &keep);
  return tape.push(
      std::move(y), {x},
      [x, keep = std::move(keep)](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>* gx = grad_if(t, x);
        if (!gx) return;
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*gx)[i] += keep.empty() ? g[i] : g[i] * keep[i];
        }
      },
      "dropout");
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (av.shape() != bv.shape()) {
    throw ShapeError("add: shapes " + shape_string(av.shape()) + " and " +
                     shape_string(bv.shape()) + " differ");
  }
  Tensor<T> y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return tape.push(
      std::move(y), {a, b},
      [a, b](Tape<T>& t, const Tensor<T>& g) {
        for (Var p : {a, b}) {
          if (Tensor<T>* gp = grad_if(t, p)) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gp)[i] += g[i];
          }
        }
      },
      "add");
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  if (av.shape() != bv.shape()) {
    throw ShapeError("sub: shapes " + shape_string(av.shape()) + " and " +
                     shape_string(bv.shape()) + " differ");
  }
  Tensor<T> y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return tape.push(
      std::move(y), {a, b},
      [a, b](Tape<T>& t, const Tensor<T>& g) {
        if (Tensor<T>* ga = grad_if(t, a)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        }
        if (Tensor<T>* gb = grad_if(t, b)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
        }
      },
      "sub");
}

template <typename T>
Var scale_along(Tape<T>& tape, Var x, Var v, std::size_t axis) {
  Tensor<T> y = dronese::scale_along(tape.value(x), tape.value(v), axis);
  return tape.push(
      std::move(y), {x, v},
      [x, v, axis](Tape<T>& t, const Tensor<T>& g) {
        scale_along_backward(t.value(x), t.value(v), g, axis, grad_if(t, x),
                             grad_if(t, v));
      },
      "scale_along");
}

template <typename T>
Var concat(Tape<T>& tape, const std::vector<Var>& parts, std::size_t axis) {
  std::vector<const Tensor<T>*> values;
  values.reserve(parts.size());
  for (Var p : parts) values.push_back(&tape.value(p));
  Tensor<T> y = dronese::concat(values, axis);
  return tape.push(
      std::move(y), parts,
      [parts, axis](Tape<T>& t, const Tensor<T>& g) {
        std::size_t offset = 0;
        for (Var p : parts) {
          const std::size_t n = t.value(p).dim(axis);
          if (Tensor<T>* gp = grad_if(t, p)) {
            Tensor<T> piece = dronese::slice(g, axis, offset, offset + n);
            for (std::size_t i = 0; i < piece.size(); ++i) (*gp)[i] += piece[i];
          }
          offset += n;
        }
      },
      "concat");
}

template <typename T>
Var slice(Tape<T>& tape, Var x, std::size_t axis, std::size_t begin,
          std::size_t end) {
  Tensor<T> y = dronese::slice(tape.value(x), axis, begin, end);
  return tape.push(
      std::move(y), {x},
      [x, axis, begin](Tape<T>& t, const Tensor<T>& g) {
        if (Tensor<T>* gx = grad_if(t, x)) slice_backward(g, axis, begin, gx);
      },
      "slice");
}

template <typename T>
Var permute(Tape<T>& tape, Var x, const std::vector<std::size_t>& perm) {
  Tensor<T> y = dronese::permute(tape.value(x), perm);
  std::vector<std::size_t> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = i;
  return tape.push(
      std::move(y), {x},
      [x, inverse](Tape<T>& t, const Tensor<T>& g) {
        if (Tensor<T>* gx = grad_if(t, x)) {
          Tensor<T> back = dronese::permute(g, inverse);
          for (std::size_t i = 0; i < back.size(); ++i) (*gx)[i] += back[i];
        }
      },
      "permute");
}

template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape shape) {
  Tensor<T> y = tape.value(x).reshaped(std::move(shape));
  return tape.push(
      std::move(y), {x},
      [x](Tape<T>& t, const Tensor<T>& g) {
        if (Tensor<T>* gx = grad_if(t, x)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
        }
      },
      "reshape");
}

#define DRONESE_INSTANTIATE_OPS(T)                                             \
  template Var conv1d(Tape<T>&, Var, Var, Var, const Conv1dSpec&);             \
  template Var conv1d_transposed(Tape<T>&, Var, Var, Var,                      \
                                 const ConvTranspose1dSpec&);                  \
  template Var conv2d(Tape<T>&, Var, Var, Var, const Conv2dSpec&);             \
  template Var linear(Tape<T>&, Var, Var, Var);                                \
  template Var attention(Tape<T>&, Var, Var, Var, std::size_t,                 \
                         const AttentionMask&);                                \
  template Var layer_norm(Tape<T>&, Var, Var, Var, std::size_t);               \
  template Var prelu(Tape<T>&, Var, Var, std::size_t);                         \
  template Var sigmoid(Tape<T>&, Var);                                         \
  template Var dropout(Tape<T>&, Var, double, bool, std::mt19937_64&);         \
  template Var add(Tape<T>&, Var, Var);                                        \
  template Var sub(Tape<T>&, Var, Var);                                        \
  template Var scale_along(Tape<T>&, Var, Var, std::size_t);                   \
  template Var concat(Tape<T>&, const std::vector<Var>&, std::size_t);         \
  template Var slice(Tape<T>&, Var, std::size_t, std::size_t, std::size_t);    \
  template Var permute(Tape<T>&, Var, const std::vector<std::size_t>&);        \
  template Var reshape(Tape<T>&, Var, Shape);

DRONESE_INSTANTIATE_OPS(float)
DRONESE_INSTANTIATE_OPS(double)

#undef DRONESE_INSTANTIATE_OPS

}  // namespace dronese::ops
