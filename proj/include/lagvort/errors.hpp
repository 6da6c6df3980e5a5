#pragma once

#include <stdexcept>
#include <string>

namespace lagvort {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// x == y for an exact kernel, or |x| = 0 for the plane kernel.
class SingularInputError : public Error {
 public:
  using Error::Error;
};

// A point outside the closed domain, or data whose support leaves it.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A particle left the disk by more than the projection tolerance, or went non-finite.
class BlowUpError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

// Oscillations or quadrature grids too coarse for the requested data.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

// Requested time is not a snapshot, or two histories cannot be compared.
class HistoryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lagvort
