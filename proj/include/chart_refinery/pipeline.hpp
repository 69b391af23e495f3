#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chart_refinery/analytics/evaluation.hpp"
#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/config.hpp"
#include "chart_refinery/refine/refine.hpp"
#include "chart_refinery/sandbox/sandbox.hpp"
#include "chart_refinery/session/clock.hpp"
#include "chart_refinery/session/store.hpp"

namespace chart_refinery {

struct AnalyzeResult {
  Session session;
  RoundOutcome round;
  bool derendered_now = false;
};

struct ApplyResult {
  Session session;
  EditOutcome outcome;
  int revision_index = 0;
};

struct ReanalyzeResult {
  Session session;
  RoundOutcome round;
};

// The three stages over one persisted session. Every operation loads the
// session, works on it and saves it before returning; callers that share a
// store across threads serialize per session (see LeaseTable).
class Pipeline {
 public:
  Pipeline(AppConfig cfg, Backends backends, std::shared_ptr<IdSource> ids = nullptr,
           Clock clock = Clock::system());

  const AppConfig& config() const { return cfg_; }
  const Backends& backends() const { return backends_; }
  SessionStore& store() { return store_; }
  const RenderSandbox& sandbox() const { return sandbox_; }
  const Clock& clock() const { return clock_; }

  Session create_session(std::vector<std::uint8_t> bytes,
                         std::optional<ImageFormat> declared = std::nullopt);
  Session load(const std::string& id) const { return store_.load(id); }

  // CREATED: derender, render revision 0, critique. DERENDERED: critique
  // only. Any other state: Conflict.
  AnalyzeResult analyze(const std::string& id);
  ApplyResult apply(const std::string& id, std::span<const std::string> rec_ids);
  ReanalyzeResult reanalyze(const std::string& id);

  // Derender + critique for one image without creating a session; used by
  // the evaluation harness.
  std::vector<std::string> recommendations_for_image(const ChartImage& image);

 private:
  AppConfig cfg_;
  Backends backends_;
  std::shared_ptr<IdSource> ids_;
  Clock clock_;
  SessionStore store_;
  RenderSandbox sandbox_;
};

// Images in `dir` (png/jpg/jpeg, by file name) or, when present,
// dir/recommendations.txt. Images that fail to de-render are skipped;
// backend errors propagate. Throws InvalidInput when nothing is found.
analytics::EvalCorpus collect_corpus(const std::filesystem::path& dir, Pipeline& pipeline);

// Every recommendation recorded on the given sessions.
analytics::EvalCorpus corpus_from_sessions(const SessionStore& store,
                                           std::span<const std::string> session_ids);

}  // namespace chart_refinery
