#pragma once

#include <stdexcept>
#include <string>

namespace sacpde {

/// Invalid user configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver could not produce a trustworthy result (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sacpde
