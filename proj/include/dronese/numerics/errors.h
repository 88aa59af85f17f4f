// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace dronese {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor rank/extent mismatch. Messages name the offending axes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced from finite inputs, degenerate softmax rows, etc.
class NumericError : public Error {
 public:
  using Error::Error;
};

class StreamError : public Error {
 public:
  using Error::Error;
};

// Bad files, bad manifests, zero-energy signals.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace dronese
