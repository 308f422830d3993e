#pragma once

#include <stdexcept>
#include <string>

namespace reap {

// Machine-readable failure categories. The service layer maps these onto
// HTTP status codes and the {code, message, detail} error payload.
enum class ErrorCode {
  kDimensionMismatch,
  kInvalidArgument,
  kNotPsd,
  kAsymmetric,
  kInfeasible,
  kToleranceFailure,
  kNonConvergence,
  kPoolExhausted,
  kUnreachable,
  kBudgetExceeded,
  kParse,
  kSingleClass,
  kSubjectPositive,
  kNotFound,
  kConflict,
  kInvalidPlan,
  kIo,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace reap
