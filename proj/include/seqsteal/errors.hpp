#pragma once

#include <stdexcept>
#include <string>

namespace seqsteal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A string or vector has the wrong length for the requested operation.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Conditioning on a prefix whose probability is zero.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A model or file violates a structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An optimization problem has an empty feasible set.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Exact enumeration was requested beyond the configured size guard.
class GuardError : public Error {
 public:
  using Error::Error;
};

}  // namespace seqsteal
