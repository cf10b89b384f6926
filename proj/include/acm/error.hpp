#pragma once

#include <stdexcept>
#include <string>

namespace acm {

// Error kinds surfaced across the library. The C API maps each one onto a
// status code; the CLI maps the category onto an exit code.
enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NotSymmetric,
  NonPositiveEigenvalue,
  NotSpd,
  NoConvergence,
  EmptyInput,
  InvalidEpoch,
  LagTooLarge,
  InconsistentInput,
  SingularSystem,
  ConstantSeries,
  TooShort,
  EmptyClass,
  SolverStall,
  AllCellsInvalid,
  TooFewSamples,
  SingleSession,
  OneClassOnly,
  LengthMismatch,
  AllZeroDiffs,
  DegenerateVariance,
  DegeneratePValue,
  PairingViolation,
  InvalidBand,
  UnstableSpec,
  FormatError,
  VersionUnsupported,
  IoError,
};

const char* error_code_name(ErrorCode code) noexcept;

// True for failures of the numerics (as opposed to bad input or config).
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace acm
