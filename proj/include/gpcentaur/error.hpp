#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gpc {

enum class ErrorCode {
  DimensionMismatch,
  NonConvexRelation,
  ZeroOrNegativeCoefficient,
  NotGPRepresentable,
  UnitError,
  DuplicateName,
  ShapeMismatch,
  UnknownVariable,
  NonPositiveValue,
  InvalidName,
  SyntaxError,
  SubtractionNotRepresentable,
  ValidationError,
  EmptyObjective,
  NotOptimal,
  SweepTooLarge,
  SweepVariableNotFixed,
  InvalidArgument,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonConvexRelation: return "NonConvexRelation";
    case ErrorCode::ZeroOrNegativeCoefficient: return "ZeroOrNegativeCoefficient";
    case ErrorCode::NotGPRepresentable: return "NotGPRepresentable";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::InvalidName: return "InvalidName";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SubtractionNotRepresentable: return "SubtractionNotRepresentable";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::EmptyObjective: return "EmptyObjective";
    case ErrorCode::NotOptimal: return "NotOptimal";
    case ErrorCode::SweepTooLarge: return "SweepTooLarge";
    case ErrorCode::SweepVariableNotFixed: return "SweepVariableNotFixed";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Base exception for everything thrown by the library. The code is the
/// machine-readable kind; what() carries a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure with a 1-based position and the set of tokens that would
/// have been accepted there.
class SyntaxError : public Error {
 public:
  SyntaxError(ErrorCode code, const std::string& msg, int line, int column,
              std::vector<std::string> expected = {})
      : Error(code, msg + " at " + std::to_string(line) + ":" + std::to_string(column)),
        line_(line), column_(column), expected_(std::move(expected)) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  int line_;
  int column_;
  std::vector<std::string> expected_;
};

struct Issue {
  std::string where;  // model path or "line N"
  std::string message;
};

/// Aggregated validation failure: every problem found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Issue> issues)
      : Error(ErrorCode::ValidationError, summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  static std::string summarize(const std::vector<Issue>& issues) {
    std::string s = std::to_string(issues.size()) + " issue(s)";
    for (const auto& i : issues) s += "\n  " + i.where + ": " + i.message;
    return s;
  }
  std::vector<Issue> issues_;
};

}  // namespace gpc
