#pragma once

#include <stdexcept>
#include <string>

namespace netimpute {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data, bad configuration, or a violated precondition. CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a singular oracle system. CLI exit code 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace netimpute
