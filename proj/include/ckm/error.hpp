#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ckm {

enum class ErrorCode {
  // validation
  DimensionMismatch,
  NonPositiveBandwidth,
  InvalidArgument,
  InvalidProbability,
  MissingJudgments,
  MissingColumn,
  NonBinaryIndicator,
  NegativeTime,
  RaggedCovariates,
  MalformedValue,
  GridMismatch,
  ConfigError,
  IoError,
  // numerical
  ZeroDensity,
  DenominatorUnderflow,
  JumpOutOfRange,
  SaturatedJump,
  BothDensitiesZero,
  AllCandidatesDegenerate,
  QuadratureNonconvergence,
};

std::string_view error_name(ErrorCode code);

/// True for failures of the numerics (as opposed to bad input); the CLI maps
/// these to exit status 3.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace ckm
