#pragma once

#include <stdexcept>
#include <string>

namespace protodetect {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or malformed input data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a numerical breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace protodetect
