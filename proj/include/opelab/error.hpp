#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opelab {

// Base class for all errors raised by the library.
class OpeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A problem failed structural validation (row sums, ranges, shape mismatches).
class ValidationError : public OpeError {
 public:
  using OpeError::OpeError;
};

// The target policy puts mass where the behavior policy (or the behavior
// occupancy) has none.  Indices identify the offending step; -1 where the
// coordinate does not apply.
class SupportViolation : public OpeError {
 public:
  SupportViolation(const std::string& msg, int t, int s, int a)
      : OpeError(msg), t(t), s(s), a(a) {}
  int t;
  int s;
  int a;
};

// Exhaustive trajectory enumeration would exceed the configured path cap.
class EnumerationCapError : public OpeError {
 public:
  EnumerationCapError(const std::string& msg, std::size_t cap)
      : OpeError(msg), cap(cap) {}
  std::size_t cap;
};

// An iterative routine (power iteration) failed to reach its tolerance.
class ConvergenceError : public OpeError {
 public:
  ConvergenceError(const std::string& msg, double residual)
      : OpeError(msg), residual(residual) {}
  double residual;
};

// Malformed run configuration (CLI / JSON config layer).
class ConfigError : public OpeError {
 public:
  using OpeError::OpeError;
};

}  // namespace opelab
