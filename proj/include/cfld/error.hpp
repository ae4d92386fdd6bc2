#pragma once

#include <stdexcept>
#include <string>

namespace cfld {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instance data violates a structural or numerical invariant.
class InvalidInstance : public Error {
 public:
  using Error::Error;
};

/// A (x, y) assignment that is not a member of the feasible set.
class InfeasibleSolution : public Error {
 public:
  using Error::Error;
};

/// Malformed instance or model file. `where()` carries line/field context.
class FormatError : public Error {
 public:
  FormatError(const std::string& where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// File carries a schema tag this build does not understand.
class SchemaVersionError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration would exceed the configured cap.
class EnumerationCapExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace cfld
