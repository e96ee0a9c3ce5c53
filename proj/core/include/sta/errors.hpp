#pragma once

#include <stdexcept>
#include <string>

namespace sta {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, malformed configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The physics failed in a way the caller asked about (ion lost, threshold missed).
class PhysicsError : public Error {
 public:
  using Error::Error;
};

/// A numerical method could not deliver its contract: degenerate ansatz,
/// trajectory collapse, accuracy loss, truncation, ill-conditioning.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sta
