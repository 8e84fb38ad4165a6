#pragma once

#include <stdexcept>
#include <string>

namespace redace {

// Each error family maps to one CLI exit code (see ExitCode).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, or artifacts that do not belong together.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// An edit path or token map that violates its index-coverage contract.
class StructuralError : public DataError {
 public:
  using DataError::DataError;
};

// A value outside its admissible domain, e.g. a confidence outside [0,1].
class RangeError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite activation, loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
};

}  // namespace redace
