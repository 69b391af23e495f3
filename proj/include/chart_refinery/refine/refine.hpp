#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/config.hpp"
#include "chart_refinery/critique/critique.hpp"
#include "chart_refinery/sandbox/sandbox.hpp"
#include "chart_refinery/session/clock.hpp"
#include "chart_refinery/session/session.hpp"

namespace chart_refinery {

// Deterministic edit prompt: role line, numbered selections, the full base
// script in a fenced block and the output instruction. A retry appends the
// previous attempt's error text. Throws PreconditionViolated when
// `selected` is empty.
std::string build_edit_prompt(const ChartSpec& base_spec, std::span<const std::string> selected,
                              const std::optional<std::string>& previous_error = std::nullopt);

struct EditOutcome {
  ChartSpec new_spec;  // origin EDITED
  RenderResult render;
  int attempts = 0;
  std::optional<std::string> failure_reason;
  std::vector<std::string> raw_completions;  // one per attempt

  bool ok() const { return !failure_reason.has_value(); }
};

// The edit -> render loop, up to cfg.max_edit_attempts times. Backend
// errors propagate; render failures are fed back into the next prompt.
EditOutcome run_edit_loop(const ChartSpec& base_spec, int base_index,
                          std::span<const std::string> selected_texts,
                          const LlmBackendConfig& llm_cfg, const RefineConfig& cfg,
                          TextCompletionBackend& llm, const RenderSandbox& sandbox);

// Selects `rec_ids`, runs the edit loop on the latest revision and, on
// success, appends a validated revision and moves the session to REFINING.
// On failure no revision is added: the selections and an audit entry are
// kept and RenderValidationFailed is thrown.
// Throws UnknownRecommendation, PreconditionViolated (empty ids),
// Conflict (wrong state), backend errors.
EditOutcome apply_recommendations(Session& session, std::span<const std::string> rec_ids,
                                  const LlmBackendConfig& llm_cfg, const RefineConfig& cfg,
                                  TextCompletionBackend& llm, const RenderSandbox& sandbox,
                                  const Clock& clock);

struct RoundOutcome {
  int round = 0;
  ParseReport report;
  std::vector<std::string> new_ids;  // recommendations actually added
  std::vector<std::string> dropped;  // duplicate texts not added
};

// Records one critique round on the session: dedupes within the round and
// against APPLIED texts (collisions go to the audit log), stores the raw
// completion and moves the session to ANALYZED.
RoundOutcome record_round(Session& session, int round, const CritiqueOutcome& outcome,
                          IdSource& ids, const Clock& clock);

// Critiques the latest revision as round latest_round() + 1.
// Throws PreconditionViolated unless the latest revision is validated.
RoundOutcome reanalyze(Session& session, const LlmBackendConfig& llm_cfg,
                       TextCompletionBackend& llm, IdSource& ids, const Clock& clock);

}  // namespace chart_refinery
