// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/numerics/tape.h"

namespace dronese {

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error("tape: invalid variable id " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error("tape: invalid variable id " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::parameter(const Tensor<T>& value, Tensor<T>* grad_sink) {
  Node n;
  n.ref = &value;
  n.requires_grad = record_ && grad_sink != nullptr;
  n.sink = n.requires_grad ? grad_sink : nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, std::initializer_list<Var> parents,
                  Backward fn, const char* op) {
  return push_node(std::move(value), parents, std::move(fn), op);
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, const std::vector<Var>& parents,
                  Backward fn, const char* op) {
  return push_node(std::move(value), parents, std::move(fn), op);
}

template <typename T>
template <typename Range>
Var Tape<T>::push_node(Tensor<T> value, const Range& parents, Backward fn,
                       const char* op) {
  require_finite(value, op);
  Node n;
  n.owned = std::move(value);
  if (record_) {
    for (Var p : parents) {
      if (node(p).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  return node(v).value();
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad(Var v) {
  Node& n = node(v);
  if (n.grad.empty() && !n.value().empty()) n.grad = Tensor<T>(n.value().shape());
  return n.grad;
}

template <typename T>
bool Tape<T>::has_grad(Var v) const {
  return !node(v).grad.empty();
}

template <typename T>
void Tape<T>::backward(Var output) {
  if (!record_) throw Error("tape: backward() on a non-recording tape");
  if (value(output).size() != 1) {
    throw ShapeError("tape: backward() needs a scalar output, got " +
                     shape_string(value(output).shape()));
  }
  grad(output)[0] = T(1);
  for (std::size_t i = static_cast<std::size_t>(output.id) + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, n.grad);
  }
  for (Node& n : nodes_) {
    if (!n.sink || n.grad.empty()) continue;
    if (n.sink->empty()) *n.sink = Tensor<T>(n.grad.shape());
    for (std::size_t k = 0; k < n.grad.size(); ++k) (*n.sink)[k] += n.grad[k];
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace dronese
