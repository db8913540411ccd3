#include "sscalib/error.hpp"

namespace sscalib {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidThreshold: return "InvalidThreshold";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kEmptyScene: return "EmptyScene";
    case ErrorCode::kBoardOutOfView: return "BoardOutOfView";
    case ErrorCode::kEmptyCloud: return "EmptyCloud";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kInsufficientPoints: return "InsufficientPoints";
    case ErrorCode::kSingleClassOnly: return "SingleClassOnly";
    case ErrorCode::kWrongLineCount: return "WrongLineCount";
    case ErrorCode::kNearParallel: return "NearParallel";
    case ErrorCode::kNoBoardPlane: return "NoBoardPlane";
    case ErrorCode::kUniformImage: return "UniformImage";
    case ErrorCode::kDegenerateContour: return "DegenerateContour";
    case ErrorCode::kWrongContourCount: return "WrongContourCount";
    case ErrorCode::kCollapsedQuad: return "CollapsedQuad";
    case ErrorCode::kAmbiguousLayout: return "AmbiguousLayout";
    case ErrorCode::kOrderingMismatch: return "OrderingMismatch";
    case ErrorCode::kSingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::kDivergedBehindCamera: return "DivergedBehindCamera";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNoColoredPoints: return "NoColoredPoints";
  }
  return "Unknown";
}

}  // namespace sscalib
