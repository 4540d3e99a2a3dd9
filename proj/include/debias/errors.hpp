#pragma once

#include <stdexcept>
#include <string>

namespace debias {

// Base of every error raised by the library. Subclasses map one-to-one onto
// the failure modes callers are expected to branch on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lattice or matrix would exceed its configured size cap. Callers fall back
// to the Monte Carlo path.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// A normalizing denominator vanished or underflowed.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Rejection target puts mass where the proposal has none.
class SupportError : public Error {
 public:
  using Error::Error;
};

class IterationCap : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Monte Carlo standard error too large relative to the bias being measured.
class GuardFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace debias
