#pragma once

#include <stdexcept>
#include <string>

namespace relanet {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration or argument combination.
class ConfigError : public Error {
  using Error::Error;
};

// Malformed corpus, graph document, or checkpoint content.
class DataError : public Error {
  using Error::Error;
};

// Failure during computation, e.g. training divergence.
class ComputeError : public Error {
  using Error::Error;
};

}  // namespace relanet
