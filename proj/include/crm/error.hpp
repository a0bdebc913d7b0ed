#pragma once

#include <stdexcept>
#include <string>

namespace crm {

/// Base for every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DecompositionMismatch : public Error {
 public:
  using Error::Error;
};

class MissingDecomposition : public Error {
 public:
  using Error::Error;
};

class ArgumentOrderError : public Error {
 public:
  using Error::Error;
};

class NonIntegrableTail : public Error {
 public:
  using Error::Error;
};

class TailDetectionFailure : public Error {
 public:
  using Error::Error;
};

/// The remaining intensity mass below x_lower is finite and smaller than the
/// requested arrival time: the process has no further jumps.
class FiniteActivityExhausted : public Error {
 public:
  using Error::Error;
};

/// Jumps required by the arrival stream are below the usable floating-point range.
class RangeExhausted : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class BracketFailure : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class UnderflowError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace crm
