#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace sscalib {

/// Machine-readable failure classes. The numeric value doubles as the CLI
/// exit code, so existing entries must keep their values.
enum class ErrorCode : int {
  kInvalidArgument = 2,
  kParseError = 3,
  kInvalidThreshold = 4,
  kIoError = 5,
  // geometry
  kNonPositiveDepth = 10,
  kNoConvergence = 11,
  // synthesis
  kEmptyScene = 20,
  kBoardOutOfView = 21,
  // cloud
  kEmptyCloud = 30,
  kDegenerateInput = 31,
  kInsufficientPoints = 32,
  kSingleClassOnly = 33,
  kWrongLineCount = 34,
  kNearParallel = 35,
  kNoBoardPlane = 36,
  // image
  kUniformImage = 40,
  kDegenerateContour = 41,
  kWrongContourCount = 42,
  kCollapsedQuad = 43,
  kAmbiguousLayout = 44,
  // registration
  kOrderingMismatch = 50,
  kSingularNormalEquations = 51,
  kDivergedBehindCamera = 52,
  kNotConverged = 53,
  // evaluation
  kEmptySet = 60,
  kLengthMismatch = 61,
  kNoColoredPoints = 62,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying an error class and, once it crosses a pipeline
/// boundary, the name of the stage that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {})
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const { return Error(code_, what(), std::move(stage)); }

 private:
  ErrorCode code_;
  std::string stage_;
};

}  // namespace sscalib
