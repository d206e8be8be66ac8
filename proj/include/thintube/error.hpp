// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thintube {

enum class ErrorCode {
  NonQuadratic,
  InfiniteValue,
  Singular,
  NotBlock,
  NotPositive,
  TrivialKernel,
  NotHermitian,
  NoConvergence,
  NearSingular,
  SolverFailure,
  VanishingCurvature,
  DegenerateSpeed,
  ThinnessViolated,
  AlreadyGauged,
  NotGauged,
  ShiftTooSmall,
  InvalidArgument,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonQuadratic: return "NonQuadratic";
    case ErrorCode::InfiniteValue: return "InfiniteValue";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::NotBlock: return "NotBlock";
    case ErrorCode::NotPositive: return "NotPositive";
    case ErrorCode::TrivialKernel: return "TrivialKernel";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NearSingular: return "NearSingular";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::VanishingCurvature: return "VanishingCurvature";
    case ErrorCode::DegenerateSpeed: return "DegenerateSpeed";
    case ErrorCode::ThinnessViolated: return "ThinnessViolated";
    case ErrorCode::AlreadyGauged: return "AlreadyGauged";
    case ErrorCode::NotGauged: return "NotGauged";
    case ErrorCode::ShiftTooSmall: return "ShiftTooSmall";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Solver-side failures map to exit code 3 in the CLI, everything else to 2.
  bool is_solver_failure() const noexcept {
    return code_ == ErrorCode::NoConvergence || code_ == ErrorCode::SolverFailure ||
           code_ == ErrorCode::NearSingular || code_ == ErrorCode::Singular;
  }

 private:
  ErrorCode code_;
};

}  // namespace thintube
