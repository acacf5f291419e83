#pragma once

#include <stdexcept>
#include <string>

namespace latentlab {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A world, channel, schedule or file failed validation.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A prefix has probability zero under the object being conditioned.
class ZeroSupportError : public Error {
public:
  using Error::Error;
};

/// A tabular model was queried at a context it never observed (with no smoothing).
class UnsupportedContextError : public Error {
public:
  using Error::Error;
};

/// An exact enumeration would exceed the configured path budget.
class BudgetExceededError : public Error {
public:
  using Error::Error;
};

} // namespace latentlab
