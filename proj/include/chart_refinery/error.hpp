#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace chart_refinery {

enum class ErrorCode {
  kInvalidInput,
  kInvalidImage,
  kInvalidConfig,
  kPreconditionViolated,
  kNotFound,
  kCorruptRecord,
  kUnknownRecommendation,
  kIllegalStatusTransition,
  kConflict,
  kBackendUnreachable,
  kBackendTimeout,
  kBackendFailure,
  kEmptyCompletion,
  kSpecTooLarge,
  kRenderValidationFailed,
  kSandboxMisconfigured,
  kTooFewRows,
  kDegenerateCentroids,
  kUnclusterableCorpus,
  kDimensionMismatch,
  kInternal,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        nlohmann::json detail = nullptr, int http_status = 0)
      : std::runtime_error(message),
        code_(code),
        detail_(std::move(detail)),
        http_status_(http_status) {}

  ErrorCode code() const { return code_; }
  const nlohmann::json& detail() const { return detail_; }
  // Upstream HTTP status when the error came from a backend response.
  int http_status() const { return http_status_; }

  // Timeouts and upstream 5xx are transient; everything else is not.
  bool retryable() const {
    return code_ == ErrorCode::kBackendTimeout ||
           (code_ == ErrorCode::kBackendFailure && http_status_ >= 500);
  }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
  int http_status_;
};

}  // namespace chart_refinery
