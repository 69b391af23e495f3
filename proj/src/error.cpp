#include "chart_refinery/error.hpp"

namespace chart_refinery {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kInvalidImage: return "InvalidImage";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kPreconditionViolated: return "PreconditionViolated";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kUnknownRecommendation: return "UnknownRecommendation";
    case ErrorCode::kIllegalStatusTransition: return "IllegalStatusTransition";
    case ErrorCode::kConflict: return "Conflict";
    case ErrorCode::kBackendUnreachable: return "BackendUnreachable";
    case ErrorCode::kBackendTimeout: return "BackendTimeout";
    case ErrorCode::kBackendFailure: return "BackendFailure";
    case ErrorCode::kEmptyCompletion: return "EmptyCompletion";
    case ErrorCode::kSpecTooLarge: return "SpecTooLarge";
    case ErrorCode::kRenderValidationFailed: return "RenderValidationFailed";
    case ErrorCode::kSandboxMisconfigured: return "SandboxMisconfigured";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kDegenerateCentroids: return "DegenerateCentroids";
    case ErrorCode::kUnclusterableCorpus: return "UnclusterableCorpus";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

}  // namespace chart_refinery
