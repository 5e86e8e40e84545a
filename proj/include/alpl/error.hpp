#pragma once

#include <stdexcept>
#include <string>

namespace alpl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or dimensions supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that violates a domain invariant (bad candidate set, missing stored label).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced or consumed during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A request that cannot be satisfied, such as selecting more samples than exist.
class RequestError : public Error {
 public:
  using Error::Error;
};

}  // namespace alpl
