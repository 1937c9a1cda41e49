#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spider {

enum class ErrorCode {
  kArgument,
  kParse,
  kBounds,
  kValue,
  kNumeric,
  kLoad,
  kIo,
  kMetric,
  kOracle,
};

std::string_view error_code_name(ErrorCode code);

/// Base exception for every failure raised by the library. The code maps
/// onto the machine-parsable error line printed by the command-line tool.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& m) : Error(ErrorCode::kArgument, m) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& m)
      : Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + m), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class BoundsError : public Error {
 public:
  explicit BoundsError(const std::string& m) : Error(ErrorCode::kBounds, m) {}
};

class ValueError : public Error {
 public:
  explicit ValueError(const std::string& m) : Error(ErrorCode::kValue, m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error(ErrorCode::kNumeric, m) {}
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& m) : Error(ErrorCode::kLoad, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorCode::kIo, m) {}
};

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& m) : Error(ErrorCode::kMetric, m) {}
};

class OracleError : public Error {
 public:
  explicit OracleError(const std::string& m) : Error(ErrorCode::kOracle, m) {}
};

}  // namespace spider
