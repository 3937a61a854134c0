#pragma once

#include <stdexcept>
#include <string>

namespace rsreg {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bounded-output geometry for which the worst-case ratio is undefined
/// (e.g. a zero denominator in the branch ratio).
class UndefinedBoundError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Failure talking to an external model process.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed run configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rsreg
