#pragma once

#include <stdexcept>
#include <string>

namespace ekmix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a pointwise formula (e.g. rho <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed model data (asymmetric or negative friction matrix, bad energy law).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be regular turned out to be singular.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Time integration could not proceed (dt underflow, floor violations).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Configuration file could not be parsed or failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ekmix
