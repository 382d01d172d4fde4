#include "ifeatt/error.hpp"

namespace ifeatt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::OmegaSingular: return "OmegaSingular";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::DegeneratePi: return "DegeneratePi";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::BadPeriod: return "BadPeriod";
    case ErrorCode::MissingWCell: return "MissingWCell";
    case ErrorCode::EmptyPeriod: return "EmptyPeriod";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::NeedsFourPeriods: return "NeedsFourPeriods";
    case ErrorCode::NoPrePeriods: return "NoPrePeriods";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorCode::NonConstantCovariate: return "NonConstantCovariate";
    case ErrorCode::BadPeriodLabels: return "BadPeriodLabels";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::RankDeficient:
    case ErrorCode::OmegaSingular:
    case ErrorCode::DegeneratePi:
    case ErrorCode::ZeroDenominator:
    case ErrorCode::TooManyFailures:
    case ErrorCode::NonSymmetric:
      return false;
    default:
      return true;
  }
}

}  // namespace ifeatt
