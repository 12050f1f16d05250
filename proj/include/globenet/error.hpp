#pragma once

#include <stdexcept>
#include <string>

namespace globenet {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extents that do not line up (channel mismatch, collapsed output, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value outside its admissible range (NaN, out-of-domain coordinate, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content: bad magic, truncated payload, bad CSV line.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The filesystem refused an operation.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace globenet
