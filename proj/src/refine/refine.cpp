#include "chart_refinery/refine/refine.hpp"

#include <set>
#include <sstream>

#include "chart_refinery/backend/retry.hpp"
#include "chart_refinery/derender/derender.hpp"
#include "chart_refinery/error.hpp"

namespace chart_refinery {
namespace {

std::string describe_failure(const RenderResult& r) {
  std::string what = "render status " + std::string(to_string(r.status));
  if (!r.stderr_excerpt.empty()) what += ":\n" + r.stderr_excerpt;
  return what;
}

}  // namespace

std::string build_edit_prompt(const ChartSpec& base_spec, std::span<const std::string> selected,
                              const std::optional<std::string>& previous_error) {
  if (selected.empty()) {
    throw Error(ErrorCode::kPreconditionViolated, "edit prompt needs at least one recommendation");
  }
  std::ostringstream p;
  p << "You are an expert Python visualization engineer. Modify the Matplotlib script below "
       "so that it addresses each requested design change while keeping the same data.\n\n";
  p << "Changes to apply:\n";
  for (std::size_t i = 0; i < selected.size(); ++i) p << (i + 1) << ". " << selected[i] << '\n';
  p << "\nCurrent script:\n```python\n" << base_spec.source;
  if (!base_spec.source.ends_with('\n')) p << '\n';
  p << "```\n\n";
  p << "Return only the complete modified script in a single ```python fenced block, "
       "with no explanation before or after it.\n";
  if (previous_error) {
    p << "\nYour previous attempt failed to render. Fix this error:\n```text\n" << *previous_error;
    if (!previous_error->ends_with('\n')) p << '\n';
    p << "```\n";
  }
  return p.str();
}

EditOutcome run_edit_loop(const ChartSpec& base_spec, int base_index,
                          std::span<const std::string> selected_texts,
                          const LlmBackendConfig& llm_cfg, const RefineConfig& cfg,
                          TextCompletionBackend& llm, const RenderSandbox& sandbox) {
  if (cfg.max_edit_attempts < 1) throw Error(ErrorCode::kInvalidConfig, "max_edit_attempts must be >= 1");
  EditOutcome out;
  out.new_spec.origin = SpecOrigin::kEdited;
  out.new_spec.parent_revision = base_index;
  std::optional<std::string> previous_error;
  RetryPolicy policy{llm_cfg.max_retries, llm_cfg.backoff_base_ms};
  for (int attempt = 1; attempt <= cfg.max_edit_attempts; ++attempt) {
    out.attempts = attempt;
    const std::string prompt = build_edit_prompt(base_spec, selected_texts, previous_error);
    int calls = 0;
    std::string completion = call_with_retries(policy, [&] { return llm.complete(prompt); }, calls);
    out.raw_completions.push_back(completion);
    std::string source;
    try {
      source = extract_code_block(completion);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyCompletion) throw;
      previous_error = "The reply contained no Python code block.";
      out.failure_reason = *previous_error;
      continue;
    }
    out.new_spec.source = source;
    out.render = sandbox.render(out.new_spec);
    if (out.render.ok()) {
      out.new_spec.validated = true;
      out.failure_reason.reset();
      return out;
    }
    previous_error = describe_failure(out.render);
    out.failure_reason = previous_error;
  }
  out.new_spec.validated = false;
  return out;
}

EditOutcome apply_recommendations(Session& session, std::span<const std::string> rec_ids,
                                  const LlmBackendConfig& llm_cfg, const RefineConfig& cfg,
                                  TextCompletionBackend& llm, const RenderSandbox& sandbox,
                                  const Clock& clock) {
  if (rec_ids.empty()) throw Error(ErrorCode::kPreconditionViolated, "no recommendations selected");
  if (session.state != SessionState::kAnalyzed && session.state != SessionState::kRefining) {
    throw Error(ErrorCode::kConflict,
                "cannot apply in state " + std::string(to_string(session.state)),
                {{"state", to_string(session.state)}});
  }
  const Revision* base = session.latest_revision();
  if (!base) throw Error(ErrorCode::kPreconditionViolated, "session has no revision to edit");

  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& id : rec_ids) {
    if (seen.insert(id).second) ids.push_back(id);
  }
  std::vector<std::string> texts;
  for (const auto& id : ids) {
    const Recommendation* rec = session.find_recommendation(id);
    if (!rec) throw Error(ErrorCode::kUnknownRecommendation, "unknown recommendation " + id, {{"id", id}});
    if (rec->status != RecStatus::kProposed && rec->status != RecStatus::kSelected) {
      throw Error(ErrorCode::kIllegalStatusTransition,
                  "recommendation " + id + " is " + std::string(to_string(rec->status)),
                  {{"id", id}, {"status", to_string(rec->status)}});
    }
    texts.push_back(rec->text);
  }
  select_recommendations(session, ids);

  const ChartSpec base_spec = base->spec;
  const int base_index = base->index;
  EditOutcome outcome;
  try {
    outcome = run_edit_loop(base_spec, base_index, texts, llm_cfg, cfg, llm, sandbox);
  } catch (const Error& e) {
    session.audit.push_back({clock.wall(), "apply_failed",
                             {{"recommendation_ids", ids}, {"error", to_string(e.code())},
                              {"message", e.what()}}});
    throw;
  }
  const int round = session.latest_round() < 0 ? 0 : session.latest_round();
  if (!outcome.ok()) {
    session.audit.push_back({clock.wall(), "apply_failed",
                             {{"recommendation_ids", ids},
                              {"attempts", outcome.attempts},
                              {"failure_reason", *outcome.failure_reason},
                              {"completions", outcome.raw_completions}}});
    throw Error(ErrorCode::kRenderValidationFailed,
                "edited script failed to render after " + std::to_string(outcome.attempts) +
                    " attempts",
                {{"attempts", outcome.attempts},
                 {"failure_reason", *outcome.failure_reason},
                 {"stderr_excerpt", outcome.render.stderr_excerpt}});
  }
  for (const auto& text : outcome.raw_completions) {
    session.raw_completions.push_back({round, "edit", text, clock.wall()});
  }
  const Revision& rev = append_revision(session, outcome.new_spec, ids, outcome.render, clock.wall());
  session.state = SessionState::kRefining;
  session.audit.push_back({clock.wall(), "applied",
                           {{"revision", rev.index}, {"recommendation_ids", ids},
                            {"attempts", outcome.attempts}}});
  return outcome;
}

RoundOutcome record_round(Session& session, int round, const CritiqueOutcome& outcome,
                          IdSource& ids, const Clock& clock) {
  RoundOutcome r;
  r.round = round;
  r.report = outcome.report;
  std::set<std::string> applied;
  for (const auto& rec : session.recommendations) {
    if (rec.status == RecStatus::kApplied) applied.insert(normalization_key(rec.text));
  }
  std::set<std::string> in_round;
  for (const auto& parsed : outcome.report.recommendations) {
    const std::string key = normalization_key(parsed.text);
    if (!in_round.insert(key).second) {
      r.dropped.push_back(parsed.text);
      continue;
    }
    if (applied.contains(key)) {
      r.dropped.push_back(parsed.text);
      session.audit.push_back({clock.wall(), "duplicate_of_applied",
                               {{"round", round}, {"text", parsed.text}}});
      continue;
    }
    Recommendation rec;
    rec.id = ids.next();
    rec.session_id = session.id;
    rec.round = round;
    rec.text = parsed.text;
    rec.raw_line = parsed.raw_line;
    r.new_ids.push_back(rec.id);
    session.recommendations.push_back(std::move(rec));
  }
  session.raw_completions.push_back({round, "critique", outcome.raw_completion, clock.wall()});
  session.state = SessionState::kAnalyzed;
  session.audit.push_back({clock.wall(), "analyzed",
                           {{"round", round}, {"added", r.new_ids.size()},
                            {"dropped", r.dropped.size()},
                            {"skipped_lines", outcome.report.skipped_lines.size()}}});
  return r;
}

RoundOutcome reanalyze(Session& session, const LlmBackendConfig& llm_cfg,
                       TextCompletionBackend& llm, IdSource& ids, const Clock& clock) {
  const Revision* latest = session.latest_revision();
  if (!latest || !latest->spec.validated) {
    throw Error(ErrorCode::kPreconditionViolated, "latest revision is not validated");
  }
  if (session.state != SessionState::kAnalyzed && session.state != SessionState::kRefining) {
    throw Error(ErrorCode::kConflict,
                "cannot re-analyze in state " + std::string(to_string(session.state)),
                {{"state", to_string(session.state)}});
  }
  CritiqueOutcome outcome = critique(latest->spec, llm_cfg, llm);
  return record_round(session, session.latest_round() + 1, outcome, ids, clock);
}

}  // namespace chart_refinery
