#pragma once

#include <stdexcept>
#include <string>

namespace loctomo {

// Base of every error the library reports. Callers that only care about
// "something went wrong in loctomo" can catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on shapes, ranges or flags.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File content that ends early or whose declared sizes disagree.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or activation during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step)
      : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace loctomo
