#pragma once

#include <stdexcept>
#include <string>

namespace nbrenc {

// Base of every error the library throws. The CLI maps subclasses onto
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes disagree (matrix products, losses, layer widths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation's contract (non-scalar loss, slot/decoder
// count mismatch, encoder returning the wrong row count).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Out-of-range or otherwise invalid argument values.
class InputError : public Error {
 public:
  using Error::Error;
};

// Training diverged or produced non-finite values.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Invalid model configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File contents do not follow the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Text parse failure; carries the 1-based line number.
class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : FormatError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Header counts disagree between paired files.
class ConsistencyError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Read/write failure or truncated file.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nbrenc
