#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rdq {

enum class ErrorCode {
  kUnsupportedLattice,
  kUnknownLattice,
  kDimensionMismatch,
  kEmptyEnumeration,
  kNumericalFailure,
  kDomainError,
  kDiscriminantNegative,
  kNoConvergence,
  kInfeasibleScale,
  kSeedMismatch,
  kDigestMismatch,
  kSingularMatrix,
  kGridTooCoarse,
  kSupportViolation,
  kInsufficientSamples,
  kInvalidArgument,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnsupportedLattice: return "UnsupportedLattice";
    case ErrorCode::kUnknownLattice: return "UnknownLattice";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyEnumeration: return "EmptyEnumeration";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kDiscriminantNegative: return "DiscriminantNegative";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kInfeasibleScale: return "InfeasibleScale";
    case ErrorCode::kSeedMismatch: return "SeedMismatch";
    case ErrorCode::kDigestMismatch: return "DigestMismatch";
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kGridTooCoarse: return "GridTooCoarse";
    case ErrorCode::kSupportViolation: return "SupportViolation";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (notably the CLI) can report the failing condition by name.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rdq
