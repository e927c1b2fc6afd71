#pragma once

#include <stdexcept>
#include <string>

namespace mimlnd {

// Base of every error raised by the library. The CLI maps each subclass to
// an exit code (see tools/mimlnd.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or configuration (bad dimension, out-of-range parameter).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. Messages name the byte offset or line number.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// An iterative solver did not reach its tolerance, or produced non-finite
// values.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// ROC is undefined (no novel or no known instances in the evaluation set).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mimlnd
