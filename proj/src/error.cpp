#include "acm/error.hpp"

namespace acm {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case ErrorCode::NotSpd: return "NotSPD";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidEpoch: return "InvalidEpoch";
    case ErrorCode::LagTooLarge: return "LagTooLarge";
    case ErrorCode::InconsistentInput: return "InconsistentInput";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ConstantSeries: return "ConstantSeries";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::SolverStall: return "SolverStall";
    case ErrorCode::AllCellsInvalid: return "AllCellsInvalid";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SingleSession: return "SingleSession";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllZeroDiffs: return "AllZeroDiffs";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::DegeneratePValue: return "DegeneratePValue";
    case ErrorCode::PairingViolation: return "PairingViolation";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::UnstableSpec: return "UnstableSpec";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveEigenvalue:
    case ErrorCode::NotSpd:
    case ErrorCode::NoConvergence:
    case ErrorCode::SingularSystem:
    case ErrorCode::SolverStall:
    case ErrorCode::AllCellsInvalid:
    case ErrorCode::DegenerateVariance:
      return true;
    default:
      return false;
  }
}

}  // namespace acm
