#include "xxz/error.hpp"

namespace xxz {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::PackingInfeasible: return "PackingInfeasible";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::DegenerateConfig: return "DegenerateConfig";
    case ErrorCode::BinningMismatch: return "BinningMismatch";
    case ErrorCode::ZeroExchange: return "ZeroExchange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::FitDegenerate: return "FitDegenerate";
    case ErrorCode::NonPhysical: return "NonPhysical";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace xxz
