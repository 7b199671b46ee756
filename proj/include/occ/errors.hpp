#pragma once

#include <stdexcept>
#include <string>

namespace occ {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Newton or continuation failure. Carries the last residual norm.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

/// Target lacks the saddle-point property (defect != 0).
class SppViolation : public Error {
 public:
  SppViolation(const std::string& what, int defect) : Error(what), defect_(defect) {}
  int defect() const { return defect_; }

 private:
  int defect_;
};

/// Evaluation outside the admissible region (e.g. log of a nonpositive control).
class DomainError : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

/// Periodic orbit collapsed onto a steady state.
class DegenerateOrbit : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or incompatible file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class NoSkiba : public Error {
 public:
  using Error::Error;
};

}  // namespace occ
