#pragma once

#include <stdexcept>
#include <string>

namespace cablecal {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain input values.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Vector or table sizes that do not agree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Singular interpolation system (coincident nodes).
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

/// All particle weights vanished.
class WeightDegeneracy : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cablecal
