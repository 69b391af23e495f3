#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/config.hpp"
#include "chart_refinery/session/clock.hpp"
#include "chart_refinery/session/session.hpp"

namespace chart_refinery {

// Substrings that mark unfenced text as plotting code.
const std::vector<std::string>& default_plotting_tokens();

// Content of the first ``` fenced block (language tag ignored, unterminated
// fence runs to the end). Without a fence, the whole trimmed text when it
// contains a plotting token. Otherwise throws EmptyCompletion.
std::string extract_code_block(std::string_view completion,
                               std::span<const std::string> plotting_tokens);
inline std::string extract_code_block(std::string_view completion) {
  return extract_code_block(completion, default_plotting_tokens());
}

struct DerenderResult {
  ChartSpec spec;  // origin DERENDERED, not validated
  std::string model_name;
  std::int64_t latency_ms = 0;
  int attempts = 1;
  std::string raw_completion;
};

// Stage 1: chart image -> plotting script via the configured backend, with
// retries on transient failures. Pure with respect to any session.
DerenderResult derender(const ChartImage& image, const DerenderBackendConfig& cfg,
                        ChartToCodeBackend& backend, const Clock& clock = Clock::system());

}  // namespace chart_refinery
