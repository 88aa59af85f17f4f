// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "dronese/numerics/tensor.h"

namespace dronese {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Records the forward evaluation of a static graph so gradients can be
// propagated in reverse. Nodes are appended in evaluation order, which is a
// topological order, so backward is one reverse sweep.
//
// A non-recording tape still evaluates every op but keeps no backward
// closures; inference paths use that mode.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor<T> value);
  // References `value` without copying; it must outlive the tape. When
  // recording, its gradient is added into *grad_sink after backward().
  Var parameter(const Tensor<T>& value, Tensor<T>* grad_sink);

  // Every new value is checked for NaN/Inf; `op` names the producer in the
  // resulting NumericError.
  Var push(Tensor<T> value, std::initializer_list<Var> parents, Backward fn,
           const char* op);
  Var push(Tensor<T> value, const std::vector<Var>& parents, Backward fn,
           const char* op);

  const Tensor<T>& value(Var v) const;
  bool requires_grad(Var v) const;
  // Zero-initialized on first access.
  Tensor<T>& grad(Var v);
  bool has_grad(Var v) const;

  // Seeds d(output)/d(output) = 1; output must hold a single element.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
    Tensor<T>* sink = nullptr;
    const Tensor<T>& value() const { return ref ? *ref : owned; }
  };

  template <typename Range>
  Var push_node(Tensor<T> value, const Range& parents, Backward fn,
                const char* op);
  Node& node(Var v);
  const Node& node(Var v) const;

  bool record_;
  std::deque<Node> nodes_;
};

}  // namespace dronese
