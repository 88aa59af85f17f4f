// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/model/params.h"

#include "dronese/numerics/errors.h"

namespace dronese {

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Shape shape,
                              bool trainable) {
  if (name.empty()) throw ConfigError("parameter name is empty");
  if (index_.count(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  index_[name] = leaves_.size();
  leaves_.push_back(ParamLeaf<T>{name, Tensor<T>(std::move(shape)), trainable});
  return leaves_.back().tensor;
}

template <typename T>
std::size_t ParamStore<T>::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& leaf : leaves_) n += leaf.tensor.size();
  return n;
}

template <typename T>
std::vector<Tensor<T>> ParamStore<T>::zeros_like() const {
  std::vector<Tensor<T>> out;
  out.reserve(leaves_.size());
  for (const auto& leaf : leaves_) out.emplace_back(leaf.tensor.shape());
  return out;
}

template <typename T>
bool ParamStore<T>::operator==(const ParamStore& other) const {
  if (leaves_.size() != other.leaves_.size()) return false;
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    const auto& a = leaves_[i];
    const auto& b = other.leaves_[i];
    if (a.name != b.name || a.trainable != b.trainable || !(a.tensor == b.tensor)) {
      return false;
    }
  }
  return true;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace dronese
