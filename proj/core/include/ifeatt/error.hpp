#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ifeatt {

enum class ErrorCode {
  // numerical / estimation failures
  RankDeficient,
  NonFiniteInput,
  OmegaSingular,
  DimensionMismatch,
  NonSymmetric,
  DegeneratePi,
  ZeroDenominator,
  TooManyFailures,
  // contract violations on inputs
  SpecMismatch,
  BadPeriod,
  MissingWCell,
  EmptyPeriod,
  EmptyCell,
  NeedsFourPeriods,
  NoPrePeriods,
  InvalidArgument,
  GroupTooSmall,
  // ingestion
  UnbalancedPanel,
  NonConstantCovariate,
  BadPeriodLabels,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// True for errors caused by the data or configuration handed in by the caller
// (as opposed to a numerical estimation failure on valid input).
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ifeatt
