#pragma once

#include <stdexcept>
#include <string>

namespace tinydl {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Object used out of order (missing or consumed forward cache, stale state).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training diverged; carries the coordinates where it happened.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, int epoch, int batch)
      : NumericError(what + " (epoch " + std::to_string(epoch) + ", batch " +
                     std::to_string(batch) + ")"),
        epoch_(epoch),
        batch_(batch) {}

  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_;
  int batch_;
};

/// Operation not defined for the given network (e.g. saliency through a step).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Failure reading a tensor, dataset or model file.
class LoadError : public Error {
 public:
  enum class Kind { io, magic, truncated, manifest, shape };

  LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace tinydl
