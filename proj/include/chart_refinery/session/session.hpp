#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chart_refinery/session/clock.hpp"
#include "chart_refinery/session/image.hpp"

namespace chart_refinery {

enum class SpecOrigin { kDerendered, kEdited, kUserSupplied };
enum class RecStatus { kProposed, kSelected, kApplied, kDismissed };
enum class RenderStatus { kSuccess, kCodeError, kTimeout, kOutputMissing };
enum class SessionState { kCreated, kDerendered, kAnalyzed, kRefining, kFailed };

std::string_view to_string(SpecOrigin v);
std::string_view to_string(RecStatus v);
std::string_view to_string(RenderStatus v);
std::string_view to_string(SessionState v);
SpecOrigin spec_origin_from_string(std::string_view s);
RecStatus rec_status_from_string(std::string_view s);
RenderStatus render_status_from_string(std::string_view s);
SessionState session_state_from_string(std::string_view s);

// The plotting script standing in for the chart's full specification.
struct ChartSpec {
  std::string source;
  SpecOrigin origin = SpecOrigin::kDerendered;
  std::optional<int> parent_revision;
  bool validated = false;

  friend bool operator==(const ChartSpec&, const ChartSpec&) = default;
};

struct RenderResult {
  RenderStatus status = RenderStatus::kOutputMissing;
  std::optional<ChartImage> image;
  std::string stderr_excerpt;
  std::int64_t duration_ms = 0;
  // Present only when the sandbox also captured a vector rendition.
  std::optional<std::string> svg;

  bool ok() const { return status == RenderStatus::kSuccess; }
  friend bool operator==(const RenderResult&, const RenderResult&) = default;
};

struct Recommendation {
  std::string id;
  std::string session_id;
  int round = 0;
  std::string text;
  std::string raw_line;
  RecStatus status = RecStatus::kProposed;
  std::optional<std::string> category;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

struct Revision {
  int index = 0;
  ChartSpec spec;
  std::vector<std::string> applied_recommendation_ids;
  std::optional<RenderResult> render;
  Timestamp created_at;

  friend bool operator==(const Revision&, const Revision&) = default;
};

// Verbatim model output kept for audit, one per backend call that produced
// recommendations or edits.
struct RawCompletion {
  int round = 0;
  std::string kind;  // "critique" | "edit"
  std::string text;
  Timestamp at;

  friend bool operator==(const RawCompletion&, const RawCompletion&) = default;
};

struct AuditEntry {
  Timestamp at;
  std::string event;
  nlohmann::json detail;

  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

struct Session {
  std::string id;
  ChartImage image;
  std::vector<Revision> revisions;
  std::vector<Recommendation> recommendations;
  SessionState state = SessionState::kCreated;
  nlohmann::json backend_config_snapshot = nlohmann::json::object();
  std::vector<RawCompletion> raw_completions;
  std::vector<AuditEntry> audit;
  Timestamp created_at;

  friend bool operator==(const Session&, const Session&) = default;

  Recommendation* find_recommendation(std::string_view rec_id);
  const Recommendation* find_recommendation(std::string_view rec_id) const;
  // Highest round that has recorded a critique, or -1 when none.
  int latest_round() const;
  std::vector<const Recommendation*> round_recommendations(int round) const;
  const Revision* latest_revision() const;
};

// Returns true if the status machine allows from -> to.
bool transition_allowed(RecStatus from, RecStatus to);
// Throws IllegalStatusTransition when the move is not allowed.
void transition(Recommendation& rec, RecStatus to);

// Fresh session in state CREATED. The image must already satisfy its
// invariants (see make_chart_image).
Session create_session(std::string id, ChartImage image, Timestamp now);

// Appends the next revision. Recommendations named in `applied_ids` must be
// SELECTED and move to APPLIED. Revision 0 takes no applied ids.
const Revision& append_revision(Session& session, ChartSpec spec,
                                std::span<const std::string> applied_ids,
                                std::optional<RenderResult> render,
                                Timestamp now);

// PROPOSED -> SELECTED for each id; SELECTED ids are left as they are.
void select_recommendations(Session& session, std::span<const std::string> ids);

void dismiss_recommendation(Session& session, std::string_view rec_id);

// Every violated session-core invariant, as human-readable messages.
std::vector<std::string> check_invariants(const Session& session);

}  // namespace chart_refinery
