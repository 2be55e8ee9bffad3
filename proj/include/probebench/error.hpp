#pragma once

#include <stdexcept>
#include <string>

namespace probebench {

// Base for every error raised by the library. The CLI maps these to exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad manifest schema, corrupt binary file, unparsable table.
class FormatError : public Error {
public:
  using Error::Error;
};

// A documented precondition or invariant was violated by the caller's data.
class InvariantError : public Error {
public:
  using Error::Error;
};

// A stored artifact disagrees with what the manifest declares.
class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// A score could not be defined (constant test targets with residual error,
// diverging optimization). Raised loudly so summaries are never corrupted.
class UndefinedScore : public Error {
public:
  using Error::Error;
};

}  // namespace probebench
