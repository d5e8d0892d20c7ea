#pragma once

#include <stdexcept>
#include <string>

namespace gaussmix {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array or vector dimensions do not agree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A parameter lies outside the region where the model is defined (e.g. |rho| >= 1).
class ConstraintError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed image or model file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A loss or fit was requested over a mask with no observed pixels.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace gaussmix
