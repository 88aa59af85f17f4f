// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/numerics/tensor.h"

#include <cmath>

namespace dronese {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& where) {
  if (!all_finite(t.values())) {
    throw NumericError("non-finite value produced by " + where);
  }
}

template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);
template void require_finite<float>(const Tensor<float>&, const std::string&);
template void require_finite<double>(const Tensor<double>&, const std::string&);

}  // namespace dronese
