#include "ckm/error.hpp"

namespace ckm {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveBandwidth: return "NonPositiveBandwidth";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::MissingJudgments: return "MissingJudgments";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonBinaryIndicator: return "NonBinaryIndicator";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::RaggedCovariates: return "RaggedCovariates";
    case ErrorCode::MalformedValue: return "MalformedValue";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ZeroDensity: return "ZeroDensity";
    case ErrorCode::DenominatorUnderflow: return "DenominatorUnderflow";
    case ErrorCode::JumpOutOfRange: return "JumpOutOfRange";
    case ErrorCode::SaturatedJump: return "SaturatedJump";
    case ErrorCode::BothDensitiesZero: return "BothDensitiesZero";
    case ErrorCode::AllCandidatesDegenerate: return "AllCandidatesDegenerate";
    case ErrorCode::QuadratureNonconvergence: return "QuadratureNonconvergence";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroDensity:
    case ErrorCode::DenominatorUnderflow:
    case ErrorCode::JumpOutOfRange:
    case ErrorCode::SaturatedJump:
    case ErrorCode::BothDensitiesZero:
    case ErrorCode::AllCandidatesDegenerate:
    case ErrorCode::QuadratureNonconvergence:
      return true;
    default:
      return false;
  }
}

}  // namespace ckm
