#pragma once

#include <stdexcept>
#include <string>

namespace mtm {

/// Invalid configuration or input (bad parameters, malformed files, violated
/// preconditions the caller controls). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Runtime invariant violation inside a simulation (budget overflow, tag
/// length mismatch, a behavior proposing to a non-neighbor). These indicate
/// bugs and are raised loudly. Maps to CLI exit code 2.
class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mtm
