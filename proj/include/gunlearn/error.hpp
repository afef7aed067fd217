#pragma once

#include <stdexcept>
#include <string>

namespace gunlearn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition or data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A node or row index is outside the valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced or consumed.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, long epoch = -1)
      : Error(what), epoch_(epoch) {}
  /// Epoch at which the problem was detected, or -1 when not applicable.
  long epoch() const noexcept { return epoch_; }

 private:
  long epoch_;
};

/// File system or stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A class needed for target replacement has no test-set support.
class UnsupportedClassError : public ValidationError {
 public:
  explicit UnsupportedClassError(int cls)
      : ValidationError("class " + std::to_string(cls) +
                        " has no test-set support for a mean posterior"),
        cls_(cls) {}
  int cls() const noexcept { return cls_; }

 private:
  int cls_;
};

}  // namespace gunlearn
