// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dronese/numerics/tensor.h"

namespace dronese {

template <typename T>
struct ParamLeaf {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

// Named parameters in creation order. Names are dot-separated module paths
// and are unique.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Shape shape, bool trainable = true);

  std::size_t size() const { return leaves_.size(); }
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor<T>& operator[](const std::string& name) { return leaves_[index(name)].tensor; }
  const Tensor<T>& operator[](const std::string& name) const {
    return leaves_[index(name)].tensor;
  }
  std::vector<ParamLeaf<T>>& leaves() { return leaves_; }
  const std::vector<ParamLeaf<T>>& leaves() const { return leaves_; }

  // Scalar count over every leaf.
  std::size_t element_count() const;
  // One zero tensor per leaf, matching shapes.
  std::vector<Tensor<T>> zeros_like() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& leaf : leaves_) {
      out.add(leaf.name, leaf.tensor.shape(), leaf.trainable) =
          leaf.tensor.template cast<U>();
    }
    return out;
  }

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<ParamLeaf<T>> leaves_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace dronese
