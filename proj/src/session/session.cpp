#include "chart_refinery/session/session.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "chart_refinery/error.hpp"

namespace chart_refinery {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<Enum, std::string_view>, N>& table,
                std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw Error(ErrorCode::kCorruptRecord,
              "unknown " + std::string(what) + ": " + std::string(s));
}

constexpr std::array<std::pair<SpecOrigin, std::string_view>, 3> kOrigins{{
    {SpecOrigin::kDerendered, "DERENDERED"},
    {SpecOrigin::kEdited, "EDITED"},
    {SpecOrigin::kUserSupplied, "USER_SUPPLIED"},
}};
constexpr std::array<std::pair<RecStatus, std::string_view>, 4> kStatuses{{
    {RecStatus::kProposed, "PROPOSED"},
    {RecStatus::kSelected, "SELECTED"},
    {RecStatus::kApplied, "APPLIED"},
    {RecStatus::kDismissed, "DISMISSED"},
}};
constexpr std::array<std::pair<RenderStatus, std::string_view>, 4> kRenderStatuses{{
    {RenderStatus::kSuccess, "SUCCESS"},
    {RenderStatus::kCodeError, "CODE_ERROR"},
    {RenderStatus::kTimeout, "TIMEOUT"},
    {RenderStatus::kOutputMissing, "OUTPUT_MISSING"},
}};
constexpr std::array<std::pair<SessionState, std::string_view>, 5> kStates{{
    {SessionState::kCreated, "CREATED"},
    {SessionState::kDerendered, "DERENDERED"},
    {SessionState::kAnalyzed, "ANALYZED"},
    {SessionState::kRefining, "REFINING"},
    {SessionState::kFailed, "FAILED"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<Enum, std::string_view>, N>& table) {
  for (const auto& [value, name] : table) {
    if (value == v) return name;
  }
  return "?";
}

}  // namespace

std::string_view to_string(SpecOrigin v) { return name_of(v, kOrigins); }
std::string_view to_string(RecStatus v) { return name_of(v, kStatuses); }
std::string_view to_string(RenderStatus v) { return name_of(v, kRenderStatuses); }
std::string_view to_string(SessionState v) { return name_of(v, kStates); }
SpecOrigin spec_origin_from_string(std::string_view s) {
  return parse_enum(s, kOrigins, "spec origin");
}
RecStatus rec_status_from_string(std::string_view s) {
  return parse_enum(s, kStatuses, "recommendation status");
}
RenderStatus render_status_from_string(std::string_view s) {
  return parse_enum(s, kRenderStatuses, "render status");
}
SessionState session_state_from_string(std::string_view s) {
  return parse_enum(s, kStates, "session state");
}

Recommendation* Session::find_recommendation(std::string_view rec_id) {
  auto it = std::find_if(recommendations.begin(), recommendations.end(),
                         [&](const Recommendation& r) { return r.id == rec_id; });
  return it == recommendations.end() ? nullptr : &*it;
}

const Recommendation* Session::find_recommendation(std::string_view rec_id) const {
  return const_cast<Session*>(this)->find_recommendation(rec_id);
}

int Session::latest_round() const {
  int round = -1;
  for (const auto& c : raw_completions) {
    if (c.kind == "critique") round = std::max(round, c.round);
  }
  for (const auto& r : recommendations) round = std::max(round, r.round);
  return round;
}

std::vector<const Recommendation*> Session::round_recommendations(int round) const {
  std::vector<const Recommendation*> out;
  for (const auto& r : recommendations) {
    if (r.round == round) out.push_back(&r);
  }
  return out;
}

const Revision* Session::latest_revision() const {
  return revisions.empty() ? nullptr : &revisions.back();
}

bool transition_allowed(RecStatus from, RecStatus to) {
  switch (from) {
    case RecStatus::kProposed:
      return to == RecStatus::kSelected || to == RecStatus::kDismissed;
    case RecStatus::kSelected:
      return to == RecStatus::kApplied;
    case RecStatus::kApplied:
    case RecStatus::kDismissed:
      return false;
  }
  return false;
}

void transition(Recommendation& rec, RecStatus to) {
  if (!transition_allowed(rec.status, to)) {
    throw Error(ErrorCode::kIllegalStatusTransition,
                "recommendation " + rec.id + " cannot move from " +
                    std::string(to_string(rec.status)) + " to " +
                    std::string(to_string(to)),
                {{"recommendation_id", rec.id},
                 {"from", to_string(rec.status)},
                 {"to", to_string(to)}});
  }
  rec.status = to;
}

Session create_session(std::string id, ChartImage image, Timestamp now) {
  if (auto problem = check_image(image); !problem.empty()) {
    throw Error(ErrorCode::kInvalidImage, problem);
  }
  Session s;
  s.id = std::move(id);
  s.image = std::move(image);
  s.state = SessionState::kCreated;
  s.created_at = now;
  return s;
}

const Revision& append_revision(Session& session, ChartSpec spec,
                                std::span<const std::string> applied_ids,
                                std::optional<RenderResult> render,
                                Timestamp now) {
  if (spec.source.empty()) {
    throw Error(ErrorCode::kPreconditionViolated, "spec source is empty");
  }
  if (spec.validated && !(render && render->ok())) {
    throw Error(ErrorCode::kPreconditionViolated,
                "validated spec requires a successful render");
  }
  const int index = static_cast<int>(session.revisions.size());
  if (index == 0 && !applied_ids.empty()) {
    throw Error(ErrorCode::kPreconditionViolated,
                "revision 0 cannot apply recommendations");
  }
  // Validate everything before mutating so a failure leaves the session intact.
  std::set<std::string> seen;
  for (const auto& rec_id : applied_ids) {
    const Recommendation* rec = session.find_recommendation(rec_id);
    if (!rec) {
      throw Error(ErrorCode::kUnknownRecommendation,
                  "unknown recommendation " + rec_id,
                  {{"recommendation_id", rec_id}});
    }
    if (!transition_allowed(rec->status, RecStatus::kApplied) ||
        !seen.insert(rec_id).second) {
      throw Error(ErrorCode::kIllegalStatusTransition,
                  "recommendation " + rec_id + " is " +
                      std::string(to_string(rec->status)) +
                      ", only SELECTED recommendations can be applied",
                  {{"recommendation_id", rec_id},
                   {"from", to_string(rec->status)},
                   {"to", "APPLIED"}});
    }
  }
  for (const auto& rec_id : applied_ids) {
    transition(*session.find_recommendation(rec_id), RecStatus::kApplied);
  }
  Revision rev;
  rev.index = index;
  rev.spec = std::move(spec);
  rev.applied_recommendation_ids.assign(applied_ids.begin(), applied_ids.end());
  rev.render = std::move(render);
  rev.created_at = now;
  session.revisions.push_back(std::move(rev));
  return session.revisions.back();
}

void select_recommendations(Session& session, std::span<const std::string> ids) {
  for (const auto& rec_id : ids) {
    const Recommendation* rec = session.find_recommendation(rec_id);
    if (!rec) {
      throw Error(ErrorCode::kUnknownRecommendation,
                  "unknown recommendation " + rec_id,
                  {{"recommendation_id", rec_id}});
    }
    if (rec->status != RecStatus::kProposed && rec->status != RecStatus::kSelected) {
      throw Error(ErrorCode::kIllegalStatusTransition,
                  "recommendation " + rec_id + " is " +
                      std::string(to_string(rec->status)),
                  {{"recommendation_id", rec_id},
                   {"from", to_string(rec->status)},
                   {"to", "SELECTED"}});
    }
  }
  for (const auto& rec_id : ids) {
    Recommendation* rec = session.find_recommendation(rec_id);
    if (rec->status == RecStatus::kProposed) transition(*rec, RecStatus::kSelected);
  }
}

void dismiss_recommendation(Session& session, std::string_view rec_id) {
  Recommendation* rec = session.find_recommendation(rec_id);
  if (!rec) {
    throw Error(ErrorCode::kUnknownRecommendation,
                "unknown recommendation " + std::string(rec_id));
  }
  transition(*rec, RecStatus::kDismissed);
}

std::vector<std::string> check_invariants(const Session& s) {
  std::vector<std::string> out;
  if (auto p = check_image(s.image); !p.empty()) out.push_back("image: " + p);

  std::set<std::string> rec_ids;
  for (const auto& r : s.recommendations) {
    if (!rec_ids.insert(r.id).second) out.push_back("duplicate recommendation id " + r.id);
    if (r.session_id != s.id) out.push_back("recommendation " + r.id + " belongs to another session");
    if (r.round < 0) out.push_back("recommendation " + r.id + " has negative round");
    if (r.text.find_first_of("\r\n") != std::string::npos) {
      out.push_back("recommendation " + r.id + " text contains a newline");
    }
    if (r.text.find_first_not_of(" \t") == std::string::npos) {
      out.push_back("recommendation " + r.id + " text is blank");
    }
  }

  std::set<std::string> applied_in_revisions;
  for (std::size_t i = 0; i < s.revisions.size(); ++i) {
    const Revision& rev = s.revisions[i];
    if (rev.index != static_cast<int>(i)) {
      out.push_back("revision indices are not contiguous at position " + std::to_string(i));
    }
    if (rev.spec.source.empty()) out.push_back("revision " + std::to_string(i) + " has empty source");
    if (i == 0 && !rev.applied_recommendation_ids.empty()) {
      out.push_back("revision 0 applies recommendations");
    }
    if (rev.spec.validated && !(rev.render && rev.render->ok())) {
      out.push_back("revision " + std::to_string(i) + " validated without successful render");
    }
    if (rev.render) {
      const bool has_image = rev.render->image && !rev.render->image->bytes.empty();
      if (rev.render->ok() != has_image) {
        out.push_back("revision " + std::to_string(i) + " render status/image mismatch");
      }
    }
    for (const auto& id : rev.applied_recommendation_ids) {
      const Recommendation* r = s.find_recommendation(id);
      if (!r) {
        out.push_back("revision " + std::to_string(i) + " references unknown recommendation " + id);
        continue;
      }
      if (r->status != RecStatus::kApplied) {
        out.push_back("recommendation " + id + " applied in revision but status is " +
                      std::string(to_string(r->status)));
      }
      if (r->round >= rev.index) {
        out.push_back("revision " + std::to_string(i) + " applies recommendation " + id +
                      " from a later round");
      }
      if (!applied_in_revisions.insert(id).second) {
        out.push_back("recommendation " + id + " applied twice");
      }
    }
  }
  for (const auto& r : s.recommendations) {
    if (r.status == RecStatus::kApplied && !applied_in_revisions.count(r.id)) {
      out.push_back("recommendation " + r.id + " APPLIED without a revision");
    }
  }

  if (s.state == SessionState::kAnalyzed && s.latest_round() < 0) {
    out.push_back("state ANALYZED without any recommendation round");
  }
  if ((s.state == SessionState::kDerendered || s.state == SessionState::kAnalyzed ||
       s.state == SessionState::kRefining) &&
      s.revisions.empty()) {
    out.push_back("state " + std::string(to_string(s.state)) + " without revision 0");
  }
  return out;
}

}  // namespace chart_refinery
