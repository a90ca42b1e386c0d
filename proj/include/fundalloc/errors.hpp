#pragma once

#include <stdexcept>
#include <string>

namespace fundalloc {

enum class ErrorCode {
  InvalidConfig,
  DimMismatch,
  NonpositiveSigma,
  EmptyBatch,
  SingleClass,
  ZeroExposures,
  ZeroDemand,
  NoEligibleFund,
  AssignedIneligible,
  InfeasibleDuringAllocation,
  TooLarge,
  Infeasible,
  UnsupportedK,
  Diverged,
  ParseError,
  SchemaError,
  IoError,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::DimMismatch: return "DIM_MISMATCH";
    case ErrorCode::NonpositiveSigma: return "NONPOSITIVE_SIGMA";
    case ErrorCode::EmptyBatch: return "EMPTY_BATCH";
    case ErrorCode::SingleClass: return "SINGLE_CLASS";
    case ErrorCode::ZeroExposures: return "ZERO_EXPOSURES";
    case ErrorCode::ZeroDemand: return "ZERO_DEMAND";
    case ErrorCode::NoEligibleFund: return "NO_ELIGIBLE_FUND";
    case ErrorCode::AssignedIneligible: return "ASSIGNED_INELIGIBLE";
    case ErrorCode::InfeasibleDuringAllocation: return "INFEASIBLE_DURING_ALLOCATION";
    case ErrorCode::TooLarge: return "TOO_LARGE";
    case ErrorCode::Infeasible: return "INFEASIBLE";
    case ErrorCode::UnsupportedK: return "UNSUPPORTED_K";
    case ErrorCode::Diverged: return "DIVERGED";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

// Process exit code class for the CLI: 2 = config/validation, 3 = I/O,
// 4 = infeasibility, 5 = numerical divergence.
inline int error_exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
    case ErrorCode::IoError:
      return 3;
    case ErrorCode::Infeasible:
    case ErrorCode::InfeasibleDuringAllocation:
      return 4;
    case ErrorCode::Diverged:
      return 5;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  const char* code_name() const noexcept { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace fundalloc
