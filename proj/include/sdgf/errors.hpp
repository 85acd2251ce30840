#pragma once

#include <stdexcept>
#include <string>

namespace sdgf {

/// Base of every error raised by the library. The CLI maps subclasses to
/// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient input data (CSV, datasets, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf or divided by zero.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An operation was called in the wrong state (e.g. backward twice).
class StateError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace sdgf
