#pragma once

#include <stdexcept>
#include <string>

namespace lamc {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (Matrix Market header, CSV field, JSON document).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input whose values violate a domain invariant.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or an inadmissible partition request.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class PlannerError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Raised by the spectral atom when a block carries no mass at all.
class EmptyBlockError : public NumericalError {
 public:
  EmptyBlockError() : NumericalError("empty block") {}
};

}  // namespace lamc
