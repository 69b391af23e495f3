#include "chart_refinery/critique/critique.hpp"

#include <cctype>
#include <unordered_set>

#include "chart_refinery/backend/retry.hpp"
#include "chart_refinery/error.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery {

const std::string_view kCritiqueInstruction =
    "You are an expert in data visualization. Analyze the chart produced by the following "
    "Python code. Identify all visual design issues---ignore any coding or technical errors. "
    "List each issue clearly and concisely, using exactly one line per issue. Each line must "
    "begin with #, and there should be no enumeration, explanations, or extra formatting.";

namespace {

// Consumes "12." / "12)" / "-" (plus following whitespace) if present.
std::string_view strip_enumeration(std::string_view s) {
  if (!s.empty() && s.front() == '-') return trim_left(s.substr(1));
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) return trim_left(s.substr(i + 1));
  return s;
}

}  // namespace

CritiquePrompt build_critique_prompt(const ChartSpec& spec, std::size_t max_spec_chars) {
  if (spec.source.empty()) {
    throw Error(ErrorCode::kPreconditionViolated, "cannot critique an empty spec");
  }
  if (spec.source.size() > max_spec_chars) {
    throw Error(ErrorCode::kSpecTooLarge,
                "spec source has " + std::to_string(spec.source.size()) +
                    " characters, cap is " + std::to_string(max_spec_chars),
                {{"size", spec.source.size()}, {"cap", max_spec_chars}});
  }
  CritiquePrompt p;
  p.instruction = std::string(kCritiqueInstruction);
  p.spec_source = spec.source;
  p.rendered = p.instruction + "\n\n" + spec.source;
  return p;
}

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::kBlank: return "BLANK";
    case SkipReason::kNotHashPrefixed: return "NOT_HASH_PREFIXED";
    case SkipReason::kEmptyAfterHash: return "EMPTY_AFTER_HASH";
    case SkipReason::kOverCap: return "OVER_CAP";
  }
  return "?";
}

std::vector<std::string> ParseReport::texts() const {
  std::vector<std::string> out;
  out.reserve(recommendations.size());
  for (const auto& r : recommendations) out.push_back(r.text);
  return out;
}

ParseReport parse_recommendations(std::string_view completion, std::size_t cap) {
  ParseReport report;
  auto lines = split_lines(completion);
  report.total_lines = static_cast<int>(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    std::string_view line = trim_left(lines[i]);
    if (trim(line).empty()) {
      report.skipped_lines.push_back({line_no, SkipReason::kBlank});
      continue;
    }
    std::string_view body = strip_enumeration(line);
    if (body.empty() || body.front() != '#') {
      report.skipped_lines.push_back({line_no, SkipReason::kNotHashPrefixed});
      continue;
    }
    std::size_t hashes = body.find_first_not_of('#');
    std::string_view text = trim(hashes == std::string_view::npos ? std::string_view{}
                                                                  : body.substr(hashes));
    if (text.empty()) {
      report.skipped_lines.push_back({line_no, SkipReason::kEmptyAfterHash});
      continue;
    }
    if (report.recommendations.size() >= cap) {
      report.skipped_lines.push_back({line_no, SkipReason::kOverCap});
      continue;
    }
    report.recommendations.push_back({line_no, std::string(text), std::string(lines[i])});
  }
  return report;
}

CritiqueOutcome critique(const ChartSpec& spec, const LlmBackendConfig& cfg,
                         TextCompletionBackend& backend) {
  CritiquePrompt prompt = build_critique_prompt(spec, cfg.max_prompt_chars);
  CritiqueOutcome outcome;
  RetryPolicy policy{cfg.max_retries, cfg.backoff_base_ms};
  outcome.raw_completion = call_with_retries(
      policy, [&] { return backend.complete(prompt.rendered); }, outcome.attempts);
  outcome.report = parse_recommendations(outcome.raw_completion);
  return outcome;
}

std::string normalization_key(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(text)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!out.empty() && std::string_view(".,;:!?").find(out.back()) != std::string_view::npos) {
    out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
  }
  return out;
}

std::vector<Recommendation> dedupe(const std::vector<Recommendation>& recs) {
  std::unordered_set<std::string> seen;
  std::vector<Recommendation> out;
  for (const auto& r : recs) {
    if (seen.insert(normalization_key(r.text)).second) out.push_back(r);
  }
  return out;
}

std::vector<std::string> dedupe(const std::vector<std::string>& texts) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& t : texts) {
    if (seen.insert(normalization_key(t)).second) out.push_back(t);
  }
  return out;
}

}  // namespace chart_refinery
