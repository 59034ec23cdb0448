#pragma once

#include <stdexcept>
#include <string>

namespace skewsync {

// Base of every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Timestamps or batches presented out of time order.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Mismatched batches (different packet counts, wrong node pair).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Preprocessing left nothing to estimate from.
class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace skewsync
