#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fvrule {

enum class ErrorCode {
  Io,
  Schema,
  DuplicateId,
  MalformedTree,
  InvalidTree,
  Provider,
  EmptyCompletion,
  DegenerateTree,
  UnparseableJudgment,
  EmptyRuleSet,
  Precondition,
  Syntax,
  UnsupportedConstruct,
  UnknownSignal,
  BudgetExceeded,
  ToolNotFound,
  ToolParse,
  Oracle,
  MissingPrediction,
  Config,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Schema: return "SchemaError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MalformedTree: return "MalformedTree";
    case ErrorCode::InvalidTree: return "InvalidTree";
    case ErrorCode::Provider: return "ProviderError";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::DegenerateTree: return "DegenerateTree";
    case ErrorCode::UnparseableJudgment: return "UnparseableJudgment";
    case ErrorCode::EmptyRuleSet: return "EmptyRuleSet";
    case ErrorCode::Precondition: return "PreconditionViolation";
    case ErrorCode::Syntax: return "SyntaxError";
    case ErrorCode::UnsupportedConstruct: return "UnsupportedConstruct";
    case ErrorCode::UnknownSignal: return "UnknownSignal";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::ToolNotFound: return "ToolNotFound";
    case ErrorCode::ToolParse: return "ToolParseError";
    case ErrorCode::Oracle: return "OracleError";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::Config: return "ConfigError";
  }
  return "Error";
}

// Base of every exception thrown by the library. The code lets callers
// branch without a dynamic_cast ladder.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::vector<std::string> expected,
              const std::string& detail)
      : Error(ErrorCode::Syntax, format(position, expected, detail)),
        position_(position),
        expected_(std::move(expected)) {}

  std::size_t position() const noexcept { return position_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string format(std::size_t position,
                            const std::vector<std::string>& expected,
                            const std::string& detail) {
    std::string msg = "syntax error at offset " + std::to_string(position);
    if (!detail.empty()) msg += ": " + detail;
    if (!expected.empty()) {
      msg += " (expected one of:";
      for (const auto& e : expected) msg += " '" + e + "'";
      msg += ")";
    }
    return msg;
  }

  std::size_t position_;
  std::vector<std::string> expected_;
};

class UnsupportedConstruct : public Error {
 public:
  UnsupportedConstruct(std::string construct, std::size_t position)
      : Error(ErrorCode::UnsupportedConstruct,
              "unsupported construct '" + construct + "' at offset " +
                  std::to_string(position)),
        construct_(std::move(construct)),
        position_(position) {}

  const std::string& construct() const noexcept { return construct_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string construct_;
  std::size_t position_;
};

class BudgetExceeded : public Error {
 public:
  BudgetExceeded(std::uint64_t required, std::uint64_t budget)
      : Error(ErrorCode::BudgetExceeded,
              "enumeration needs " + std::to_string(required) +
                  " trace evaluations, budget is " + std::to_string(budget)),
        required_(required) {}

  std::uint64_t required() const noexcept { return required_; }

 private:
  std::uint64_t required_;
};

class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : Error(ErrorCode::Provider, what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

// One rejected record of a line-oriented file. Loaders collect these
// rather than aborting.
struct RecordError {
  std::size_t line = 0;  // 1-based
  ErrorCode code = ErrorCode::Schema;
  std::string reason;
};

}  // namespace fvrule
