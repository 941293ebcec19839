#pragma once

#include <stdexcept>
#include <string>

namespace mapeval {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File system failures (open, read, write).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Numerically invalid input, e.g. a covariance with a negative eigenvalue.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// ICP could not produce a pose.
class RegistrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mapeval
