#pragma once

#include <stdexcept>
#include <string>

namespace otbp {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
  success = 0,
  validation = 1,
  falsification = 2,
  internal = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode code() const noexcept { return ExitCode::internal; }
};

// Bad input: malformed files, inconsistent parameters, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
  ExitCode code() const noexcept override { return ExitCode::validation; }
};

// A certified breakdown value fell outside the depth bracket.
class FalsificationError : public Error {
 public:
  using Error::Error;
  ExitCode code() const noexcept override { return ExitCode::falsification; }
};

class InternalError : public Error {
 public:
  using Error::Error;
};

// An assignment whose optimum is not essentially unique.
class DegenerateAssignmentError : public ValidationError {
 public:
  DegenerateAssignmentError(const std::string& what, double scale)
      : ValidationError(what), scale_(scale) {}
  double scale() const noexcept { return scale_; }

 private:
  double scale_;
};

}  // namespace otbp
