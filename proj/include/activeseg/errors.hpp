#pragma once

#include <stdexcept>
#include <string>

namespace activeseg {

/// Input data violates a structural rule (dangling endpoint, duplicate edge...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DanglingEndpoint : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Operation precondition failed (already-labeled id, empty labeled set...).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace activeseg
