#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calseq {

// Input errors (bad files, bad config) map to exit code 2 in the CLI,
// NumericError and other runtime failures to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : InputError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class ReferentialError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Precondition on the mathematical domain of an operation (empty list, empty
// prefix, unknown item).
class DomainError : public Error {
 public:
  using Error::Error;
};

// KL with q(c) = 0 where p(c) > 0.
class DivergenceError : public DomainError {
 public:
  using DomainError::DomainError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace calseq
