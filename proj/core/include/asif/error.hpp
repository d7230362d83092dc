#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace asif {

/// Broad failure class; the CLI maps each one to an exit status.
enum class ErrorKind {
  input,        // malformed data, bad flags, violated preconditions
  numerical,    // a fit or statistic could not be computed
  cap_exceeded  // an enumeration or redraw limit was hit
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

class CapExceededError : public Error {
 public:
  explicit CapExceededError(const std::string& what)
      : Error(ErrorKind::cap_exceeded, what) {}
};

/// One problem found while validating ingested data. `row` is 1-based over
/// data rows (the header is row 0) and is 0 when the issue is column-wide.
struct ValidationIssue {
  enum class Code {
    missing_column,
    duplicate_column,
    non_binary,
    missing_value,
    non_numeric,
    non_finite,
    constant_vector,
    ragged_row,
    empty_table
  };
  Code code;
  std::string column;
  std::size_t row = 0;
  std::string message;
};

/// Thrown by dataset validation; carries every violation, not just the first.
class ValidationError : public InputError {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues);
  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ValidationIssue> issues_;
};

}  // namespace asif
