#pragma once

#include <stdexcept>
#include <string>

namespace abc {

enum class ErrorCode {
  NON_COPRIME,
  BAD_SIGMA,
  MISSING_ESTIMATE,
  NO_MIXING_TIME,
  NUMERIC_UNDERFLOW,
  SINGULAR_DERIV,
  IN_TRANSITION,
  INCONSISTENT_PARAMS,
  UNDERFLOW,
  QUADRATURE_UNCONVERGED,
  INSUFFICIENT_SAMPLES,
  NO_GOOD_SAMPLES,
  TRANSITION_AT_POINT,
  BUDGET_EXCEEDED,
  BAD_CONFIG,
  BAD_ARGUMENT,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NON_COPRIME: return "NON_COPRIME";
    case ErrorCode::BAD_SIGMA: return "BAD_SIGMA";
    case ErrorCode::MISSING_ESTIMATE: return "MISSING_ESTIMATE";
    case ErrorCode::NO_MIXING_TIME: return "NO_MIXING_TIME";
    case ErrorCode::NUMERIC_UNDERFLOW: return "NUMERIC_UNDERFLOW";
    case ErrorCode::SINGULAR_DERIV: return "SINGULAR_DERIV";
    case ErrorCode::IN_TRANSITION: return "IN_TRANSITION";
    case ErrorCode::INCONSISTENT_PARAMS: return "INCONSISTENT_PARAMS";
    case ErrorCode::UNDERFLOW: return "UNDERFLOW";
    case ErrorCode::QUADRATURE_UNCONVERGED: return "QUADRATURE_UNCONVERGED";
    case ErrorCode::INSUFFICIENT_SAMPLES: return "INSUFFICIENT_SAMPLES";
    case ErrorCode::NO_GOOD_SAMPLES: return "NO_GOOD_SAMPLES";
    case ErrorCode::TRANSITION_AT_POINT: return "TRANSITION_AT_POINT";
    case ErrorCode::BUDGET_EXCEEDED: return "BUDGET_EXCEEDED";
    case ErrorCode::BAD_CONFIG: return "BAD_CONFIG";
    case ErrorCode::BAD_ARGUMENT: return "BAD_ARGUMENT";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace abc
