#pragma once

#include <stdexcept>
#include <string>

namespace cpgan {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes for a primitive or loss.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared in a tensor or loss.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the gradient tape (replay, foreign node, non-scalar loss).
class TapeError : public Error {
 public:
  using Error::Error;
};

/// Bad argument value outside any shape rule.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File content does not match its declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unknown configuration key/value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpgan
