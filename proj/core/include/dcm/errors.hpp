#pragma once

#include <stdexcept>
#include <string>

namespace dcm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating corpus input.
class CorpusError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, corrupt, or incompatible checkpoint / dump file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch or out-of-contract argument to a numeric routine.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Loss became non-finite during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A correlation coefficient is undefined for the given inputs.
class CorrelationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcm
