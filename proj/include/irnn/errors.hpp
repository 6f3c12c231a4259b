// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace irnn {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (non-scalar backward seed,
/// empty input where one is required, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value or undefined metric.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace irnn
