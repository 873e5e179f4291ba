#pragma once

#include <stdexcept>
#include <string>

namespace declab {

/// Malformed or inconsistent run configuration (unknown keys, bad values,
/// incompatible checkpoint). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite loss, gradient or parameter during training. Maps to CLI
/// exit code 3.
class TrainingDivergedError : public std::runtime_error {
 public:
  explicit TrainingDivergedError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace declab
