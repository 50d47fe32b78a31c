#pragma once

#include <stdexcept>
#include <string>

namespace idec {

// Base for every error raised by the library. Callers that only need a
// diagnostic can catch this; the subclasses exist so the CLI and the
// harness can map failures to exit codes and per-instance error records.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file does not match the expected schema.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A value violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or incomplete configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Prompt plus generated prefix exceeds the backend's context window.
class LengthError : public Error {
 public:
  using Error::Error;
};

// Remote request failed; may succeed on retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Remote backend could not be reached at all.
class ConnectivityError : public TransportError {
 public:
  using TransportError::TransportError;
};

// Correlation is undefined (zero variance in one of the series).
class UndefinedCorrelationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace idec
