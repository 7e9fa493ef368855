#pragma once

#include <stdexcept>
#include <string>

namespace uem {

/// Base of every error thrown by the library. The CLI maps the concrete
/// subclass onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument lies outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (index out of range, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or command-line usage (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during training (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace uem
