#pragma once

#include <stdexcept>
#include <string>

namespace udts {

// Error taxonomy. Every failure the library raises derives from Error so
// callers can catch the whole family or a specific kind.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value or degenerate construction request.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Matrix / sequence dimension mismatch.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
  using Error::Error;
};

// Operation applied to state that is stale or inconsistent.
class StateError : public Error {
public:
  using Error::Error;
};

// Index outside the valid range.
class IndexError : public Error {
public:
  using Error::Error;
};

// Value outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// Malformed or truncated file content; message carries the byte offset.
class FormatError : public Error {
public:
  using Error::Error;
};

// Filesystem-level failure (open, write, flush).
class IoError : public Error {
public:
  using Error::Error;
};

// Caller lacks the capability the accessor requires (e.g. the training path
// asking for evaluation-only ground truth).
class CapabilityError : public Error {
public:
  using Error::Error;
};

}  // namespace udts
