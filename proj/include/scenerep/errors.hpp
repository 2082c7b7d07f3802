#pragma once

#include <stdexcept>
#include <string>

namespace scenerep {

/// Raised when a scenario or training configuration is malformed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an API is called out of protocol (step after done, bad index...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace scenerep
