#pragma once

#include <stdexcept>
#include <string>

namespace sketchreward {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user-supplied data: source files, configs, demo files, CLI arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

struct SourceLocation {
  int line = 1;
  int column = 1;
};

/// Syntax or name-resolution failure inside a text artifact.
class ParseError : public InputError {
 public:
  ParseError(SourceLocation where, const std::string& what)
      : InputError(std::to_string(where.line) + ":" + std::to_string(where.column) + ": " + what),
        where_(where),
        detail_(what) {}

  SourceLocation location() const noexcept { return where_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  SourceLocation where_;
  std::string detail_;
};

/// Cross-artifact inconsistency, e.g. a constraint naming a hole the sketch lacks.
class LinkError : public InputError {
 public:
  using InputError::InputError;
};

/// Precondition violation on an API call (sizes, ranges).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced during estimation or training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sketchreward
