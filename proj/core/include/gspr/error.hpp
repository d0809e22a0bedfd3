#pragma once

#include <stdexcept>
#include <string>

namespace gspr {

// Base for every error raised by the library. The CLI maps the concrete
// kinds onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or missing input: bad file layout, missing property, bad path.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input carrying invalid values (NaN, out-of-range records).
class DataError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (e.g. too few nodes for the neighbor count).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Evaluation requested on an empty database or query set.
class EmptyEvaluationError : public Error {
 public:
  using Error::Error;
};

// Process exit code for an error kind: 2 input, 3 numeric, 4 empty eval.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace gspr
