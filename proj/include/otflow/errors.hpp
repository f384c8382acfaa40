#pragma once

#include <stdexcept>
#include <string>

namespace otflow {

enum class ErrorCode {
  PoleSingular,
  TangencyViolation,
  OverlapStarved,
  SingularPair,
  NearDegenerateMixedHessian,
  CutLocusReached,
  NewtonDiverged,
  SingularJacobian,
  NonConvexState,
  StepFailed,
  NonConvergence,
  InsufficientData,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::PoleSingular: return "PoleSingular";
    case ErrorCode::TangencyViolation: return "TangencyViolation";
    case ErrorCode::OverlapStarved: return "OverlapStarved";
    case ErrorCode::SingularPair: return "SingularPair";
    case ErrorCode::NearDegenerateMixedHessian: return "NearDegenerateMixedHessian";
    case ErrorCode::CutLocusReached: return "CutLocusReached";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NonConvexState: return "NonConvexState";
    case ErrorCode::StepFailed: return "StepFailed";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace otflow
