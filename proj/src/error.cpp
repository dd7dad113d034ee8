#include "soap/error.hpp"

namespace soap {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArchitecture: return "InvalidArchitecture";
    case ErrorKind::kSpaceTooLarge: return "SpaceTooLarge";
    case ErrorKind::kNoValidNeighbor: return "NoValidNeighbor";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kBadGhostSize: return "BadGhostSize";
    case ErrorKind::kBadConfig: return "BadConfig";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kFormatError: return "FormatError";
    case ErrorKind::kNumericalDivergence: return "NumericalDivergence";
    case ErrorKind::kSingleClass: return "SingleClass";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kDegenerateInput: return "DegenerateInput";
    case ErrorKind::kInsufficientData: return "InsufficientData";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kModelMissing: return "ModelMissing";
    case ErrorKind::kMissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

}  // namespace soap
