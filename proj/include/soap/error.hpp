#pragma once

#include <stdexcept>
#include <string>

namespace soap {

enum class ErrorKind {
  kInvalidArchitecture,
  kSpaceTooLarge,
  kNoValidNeighbor,
  kShapeMismatch,
  kBadGhostSize,
  kBadConfig,
  kIoError,
  kFormatError,
  kNumericalDivergence,
  kSingleClass,
  kLengthMismatch,
  kDegenerateInput,
  kInsufficientData,
  kDimensionMismatch,
  kModelMissing,
  kMissingArtifact,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` identifies the contract
/// violation so callers and tests can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace soap
