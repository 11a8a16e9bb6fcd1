#pragma once

#include <stdexcept>
#include <string>

namespace ropkit {

/// Precondition violated by the caller (bad dimensions, channel count, parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A file or document could not be parsed (corrupt image, schema violation).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The filesystem refused a read or write.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ropkit
