#pragma once

#include <stdexcept>
#include <string>

namespace deepadc {

/// Caller passed something out of contract: bad shape, range, or parameter.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Files that are missing, unreadable, or of the wrong format.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced or would produce a non-finite or undefined result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deepadc
