#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/config.hpp"
#include "chart_refinery/session/session.hpp"

namespace chart_refinery {

// The critique instruction, byte-for-byte. Kept in sync with
// fixtures/critique/instruction.txt by a test.
extern const std::string_view kCritiqueInstruction;

inline constexpr std::size_t kDefaultMaxSpecChars = 32 * 1024;
inline constexpr std::size_t kMaxRecommendationsPerRound = 50;

struct CritiquePrompt {
  std::string instruction;
  std::string spec_source;
  std::string rendered;  // instruction + "\n\n" + spec_source
};

// Throws PreconditionViolated for an empty source and SpecTooLarge when the
// source exceeds max_spec_chars. Never truncates.
CritiquePrompt build_critique_prompt(const ChartSpec& spec,
                                     std::size_t max_spec_chars = kDefaultMaxSpecChars);

enum class SkipReason { kBlank, kNotHashPrefixed, kEmptyAfterHash, kOverCap };
std::string_view to_string(SkipReason reason);

struct ParsedRecommendation {
  int line_no = 0;  // 1-based
  std::string text;
  std::string raw_line;
};

struct SkippedLine {
  int line_no = 0;
  SkipReason reason = SkipReason::kNotHashPrefixed;
};

struct ParseReport {
  std::vector<ParsedRecommendation> recommendations;
  std::vector<SkippedLine> skipped_lines;
  int total_lines = 0;

  bool empty() const { return recommendations.empty(); }
  std::vector<std::string> texts() const;
};

// Total: never throws. A line yields a recommendation iff, after leading
// whitespace and an optional enumeration prefix ("12." / "3)" / "-"), it
// starts with '#'. The text is what follows the '#' run, trimmed.
ParseReport parse_recommendations(std::string_view completion,
                                  std::size_t cap = kMaxRecommendationsPerRound);

struct CritiqueOutcome {
  ParseReport report;
  std::string raw_completion;
  int attempts = 1;
  // True when no line parsed; surfaced to callers, not thrown.
  bool no_recommendations() const { return report.empty(); }
};

CritiqueOutcome critique(const ChartSpec& spec, const LlmBackendConfig& cfg,
                         TextCompletionBackend& backend);

// Lowercase, whitespace runs collapsed, trailing punctuation stripped.
std::string normalization_key(std::string_view text);

// Stable dedupe by normalization_key; first occurrence wins.
std::vector<Recommendation> dedupe(const std::vector<Recommendation>& recs);
std::vector<std::string> dedupe(const std::vector<std::string>& texts);

}  // namespace chart_refinery
