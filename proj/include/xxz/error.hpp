#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xxz {

enum class ErrorCode {
  ConfigError,
  DomainError,
  PackingInfeasible,
  TargetUnreachable,
  DegenerateConfig,
  BinningMismatch,
  ZeroExchange,
  DimensionMismatch,
  IndexOutOfRange,
  ConvergenceFailure,
  StepSizeUnderflow,
  FitDegenerate,
  NonPhysical,
  WindowTooSmall,
  NonConvergence,
  NoOverlap,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

  // Config and I/O problems are user errors; everything else is numerical.
  bool is_config_error() const noexcept {
    return code_ == ErrorCode::ConfigError || code_ == ErrorCode::IoError;
  }

 private:
  ErrorCode code_;
};

}  // namespace xxz
