#include "mmsi/error.hpp"

namespace mmsi {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Schema: return "SchemaError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateSubset: return "DegenerateSubset";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::InconsistentTotals: return "InconsistentTotals";
    case ErrorCode::IncompatibleMethod: return "IncompatibleMethod";
    case ErrorCode::MismatchedSubjectAxis: return "MismatchedSubjectAxis";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
  }
  return "Error";
}

bool is_numerical(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVariance:
    case ErrorCode::Separation:
    case ErrorCode::NoConvergence:
    case ErrorCode::NotPSD:
    case ErrorCode::DegenerateVariance:
      return true;
    default:
      return false;
  }
}

}  // namespace mmsi
