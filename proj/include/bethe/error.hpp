#pragma once

#include <stdexcept>
#include <string>

namespace bethe {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: unknown ids, bad dimensions, invalid orders, bad JSON.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An explicit size cap was exceeded (enumeration, isomorphism search).
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// A map handed to an order-theoretic check is not order preserving.
class OrderError : public Error {
 public:
  using Error::Error;
};

/// Iteration produced NaN or infinity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A model for which a rewrite is undefined (e.g. a zero counting coefficient).
class DegenerateModel : public Error {
 public:
  using Error::Error;
};

}  // namespace bethe
