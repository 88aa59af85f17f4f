// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Differentiable wrappers: each op evaluates its kernel and records the
// matching backward on the tape. An invalid Var for a bias means "no bias".

#pragma once

#include <random>
#include <vector>

#include "dronese/numerics/kernels.h"
#include "dronese/numerics/tape.h"

namespace dronese::ops {

template <typename T>
Var conv1d(Tape<T>& tape, Var x, Var w, Var b, const Conv1dSpec& spec);
template <typename T>
Var conv1d_transposed(Tape<T>& tape, Var x, Var w, Var b,
                      const ConvTranspose1dSpec& spec);
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var b, const Conv2dSpec& spec);
template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var b);
template <typename T>
Var attention(Tape<T>& tape, Var q, Var k, Var v, std::size_t heads,
              const AttentionMask& mask);
template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var gain, Var shift, std::size_t axis);
template <typename T>
Var prelu(Tape<T>& tape, Var x, Var slope, std::size_t axis);
template <typename T>
Var sigmoid(Tape<T>& tape, Var x);
template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, bool train,
            std::mt19937_64& rng);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);
template <typename T>
Var sub(Tape<T>& tape, Var a, Var b);
template <typename T>
Var scale_along(Tape<T>& tape, Var x, Var v, std::size_t axis);

template <typename T>
Var concat(Tape<T>& tape, const std::vector<Var>& parts, std::size_t axis);
template <typename T>
Var slice(Tape<T>& tape, Var x, std::size_t axis, std::size_t begin,
          std::size_t end);
template <typename T>
Var permute(Tape<T>& tape, Var x, const std::vector<std::size_t>& perm);
template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape shape);

}  // namespace dronese::ops
