#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shoulderscope {

enum class ErrorCode {
  kPointAtInfinity,
  kBehindCamera,
  kDegenerateConfiguration,
  kSingularMatrix,
  kInvalidArgument,
  kMalformedHeader,
  kTruncatedData,
  kBadSigma,
  kTooSmall,
  kBadThresholds,
  kParallelLines,
  kTooManyLevels,
  kEmptySequence,
  kInsufficientLines,
  kDegenerateQuad,
  kCollinearPoints,
  kRankDeficient,
  kNoValidTracks,
  kBadFactor,
  kOutOfBounds,
  kEmptyInput,
  kEmptyCluster,
  kNoKeyHit,
  kBadInput,
  kUnknownPreset,
  kUnknownLabel,
  kQuadOutOfFrame,
  kContactOutsideKeys,
  kIoError,
  kPipelineAbort,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kPointAtInfinity: return "PointAtInfinity";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kTruncatedData: return "TruncatedData";
    case ErrorCode::kBadSigma: return "BadSigma";
    case ErrorCode::kTooSmall: return "TooSmall";
    case ErrorCode::kBadThresholds: return "BadThresholds";
    case ErrorCode::kParallelLines: return "ParallelLines";
    case ErrorCode::kTooManyLevels: return "TooManyLevels";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kInsufficientLines: return "InsufficientLines";
    case ErrorCode::kDegenerateQuad: return "DegenerateQuad";
    case ErrorCode::kCollinearPoints: return "CollinearPoints";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kNoValidTracks: return "NoValidTracks";
    case ErrorCode::kBadFactor: return "BadFactor";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyCluster: return "EmptyCluster";
    case ErrorCode::kNoKeyHit: return "NoKeyHit";
    case ErrorCode::kBadInput: return "BadInput";
    case ErrorCode::kUnknownPreset: return "UnknownPreset";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kQuadOutOfFrame: return "QuadOutOfFrame";
    case ErrorCode::kContactOutsideKeys: return "ContactOutsideKeys";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kPipelineAbort: return "PipelineAbort";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the ErrorCode kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the recognition pipeline; `stage()` names the step that failed.
class PipelineAbort : public Error {
 public:
  PipelineAbort(std::string stage, ErrorCode cause, const std::string& what)
      : Error(ErrorCode::kPipelineAbort, stage + ": " + what),
        stage_(std::move(stage)),
        cause_(cause) {}

  const std::string& stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::string stage_;
  ErrorCode cause_;
};

}  // namespace shoulderscope
