#pragma once

#include <stdexcept>
#include <string>

namespace ihfood {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unsupported file contents (bad header, wrong datatype, schema).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Readable file whose payload violates a data invariant (NaN/Inf, wrong size).
class DataError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Numerical failure while fitting or scoring (singular covariance, rank 0,
// dimension mismatch between a model and its input).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace ihfood
