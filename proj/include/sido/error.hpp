#pragma once

#include <stdexcept>
#include <string>

namespace sido {

/// Base class for every error raised by the library. The CLI maps the
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a structural or numeric invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string code, const std::string& what)
      : Error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// A computation was asked to work on data that cannot support it
/// (empty table, zero variance, singular matrix, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed, or a file is corrupt.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace sido
