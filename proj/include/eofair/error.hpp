#pragma once

#include <stdexcept>
#include <string>

namespace eofair {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  kSchema,         // missing column, misaligned file, malformed JSON
  kValue,          // a value outside its domain (e.g. sensitive = 2)
  kParse,          // unparseable or non-finite cell
  kGroupCoverage,  // a sensitive group is absent or too small
  kNumeric,        // a numerical procedure could not proceed
  kConfig,         // invalid configuration or flags
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& m) : Error(ErrorKind::kSchema, m) {}
};

class ValueError : public Error {
 public:
  explicit ValueError(const std::string& m) : Error(ErrorKind::kValue, m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(ErrorKind::kParse, m) {}
};

class GroupCoverageError : public Error {
 public:
  explicit GroupCoverageError(const std::string& m)
      : Error(ErrorKind::kGroupCoverage, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorKind::kNumeric, m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::kConfig, m) {}
};

/// 2 schema/value/parse, 3 group coverage, 4 numeric, 5 config.
int exit_code(ErrorKind kind) noexcept;

const char* to_string(ErrorKind kind) noexcept;

}  // namespace eofair
