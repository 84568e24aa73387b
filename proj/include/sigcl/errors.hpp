#pragma once

#include <stdexcept>
#include <string>

namespace sigcl {

// Precondition violated by the caller (bad shape, out-of-range parameter).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A file or directory the operation needs does not exist.
class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On-disk data is malformed, truncated, or inconsistent with its manifest.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Stored parameter shapes do not match the module being restored.
class ShapeMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace sigcl
