#include "chart_refinery/derender/derender.hpp"

#include <cctype>

#include "chart_refinery/backend/retry.hpp"
#include "chart_refinery/error.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery {

const std::vector<std::string>& default_plotting_tokens() {
  static const std::vector<std::string> tokens = {"plt.", "figure(", "subplots(", "ax."};
  return tokens;
}

namespace {

// Drops leading blank lines and trailing whitespace; indentation of the first
// code line is significant in Python and stays.
std::string strip_outer_blank(std::string_view text) {
  std::size_t last = text.find_last_not_of(" \t\r\n");
  if (last == std::string_view::npos) return {};
  std::size_t first = 0;
  for (std::size_t i = 0; i <= last; ++i) {
    if (text[i] == '\n') first = i + 1;
    if (!std::isspace(static_cast<unsigned char>(text[i]))) break;
  }
  return std::string(text.substr(first, last - first + 1));
}

}  // namespace

std::string extract_code_block(std::string_view completion,
                               std::span<const std::string> plotting_tokens) {
  auto lines = split_lines(completion);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!trim_left(lines[i]).starts_with("```")) continue;
    std::string body;
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (trim_left(lines[j]).starts_with("```")) break;
      body.append(lines[j]);
      body.push_back('\n');
    }
    std::string code = strip_outer_blank(body);
    if (code.empty()) {
      throw Error(ErrorCode::kEmptyCompletion, "first fenced code block is empty");
    }
    return code;
  }
  std::string text = strip_outer_blank(completion);
  for (const auto& token : plotting_tokens) {
    if (text.find(token) != std::string::npos) return text;
  }
  throw Error(ErrorCode::kEmptyCompletion, "completion contains no extractable plotting code");
}

DerenderResult derender(const ChartImage& image, const DerenderBackendConfig& cfg,
                        ChartToCodeBackend& backend, const Clock& clock) {
  if (auto problem = check_image(image); !problem.empty()) {
    throw Error(ErrorCode::kInvalidImage, problem);
  }
  RetryPolicy policy{cfg.max_retries, cfg.backoff_base_ms};
  DerenderResult result;
  const auto start = clock.monotonic_ms();
  result.raw_completion = call_with_retries(
      policy, [&] { return backend.complete(cfg.instruction, image); }, result.attempts);
  result.latency_ms = clock.monotonic_ms() - start;
  result.model_name = cfg.model_name;
  result.spec.source = extract_code_block(result.raw_completion);
  result.spec.origin = SpecOrigin::kDerendered;
  result.spec.validated = false;
  return result;
}

}  // namespace chart_refinery
