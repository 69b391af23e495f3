#include <doctest.h>

#include <algorithm>
#include <random>

#include "chart_refinery/pipeline.hpp"
#include "chart_refinery/refine/refine.hpp"
#include "expect_error.hpp"
#include "test_support.hpp"

using namespace chart_refinery;
using testsupport::TempDir;

namespace {

struct Fixture {
  TempDir dir;
  testsupport::Mocks mocks;
  Pipeline pipeline;

  explicit Fixture(MockCriticOptions opts = {})
      : mocks(opts),
        pipeline(testsupport::test_config(dir.path()), mocks.backends(), std::make_shared<SeededIdSource>(5),
                 testsupport::fixed_clock()) {}

  // Bar chart session analyzed once.
  Session analyzed() {
    Session s = pipeline.create_session(testsupport::read_bytes(testsupport::bar_chart_png()));
    return pipeline.analyze(s.id).session;
  }
};

std::vector<std::string> ids_where(const Session& s, const std::function<bool(const Recommendation&)>& pred) {
  std::vector<std::string> out;
  for (const auto& r : s.recommendations) {
    if (pred(r)) out.push_back(r.id);
  }
  return out;
}

const Recommendation& rec_with_text(const Session& s, std::string_view needle) {
  auto it = std::find_if(s.recommendations.begin(), s.recommendations.end(),
                         [&](const Recommendation& r) { return r.text.find(needle) != std::string::npos; });
  REQUIRE(it != s.recommendations.end());
  return *it;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE_BEGIN("refine");

TEST_CASE("edit prompt: selections and full source appear exactly once") {
  ChartSpec base;
  for (int i = 0; i < 10; ++i) base.source += "line_" + std::to_string(i) + " = plt.plot([" + std::to_string(i) + "])\n";
  std::vector<std::string> selected = {"Legend overlaps the data", "Y-axis lacks units"};
  const std::string p = build_edit_prompt(base, selected);
  CHECK(count_occurrences(p, "Legend overlaps the data") == 1);
  CHECK(count_occurrences(p, "Y-axis lacks units") == 1);
  CHECK(count_occurrences(p, base.source) == 1);
  CHECK(p.find("1. Legend overlaps the data\n2. Y-axis lacks units\n") != std::string::npos);
  CHECK(p.find("```python\n" + base.source + "```") != std::string::npos);
  CHECK(p == build_edit_prompt(base, selected));

  const std::string retry = build_edit_prompt(base, selected, std::string("NameError: x"));
  CHECK(retry.starts_with(p));
  CHECK(retry.find("NameError: x") != std::string::npos);

  CHECK(error_code_of([&] { build_edit_prompt(base, std::vector<std::string>{}); }) ==
        ErrorCode::kPreconditionViolated);
}

TEST_CASE("apply: valid edit on the first attempt adds one revision") {
  Fixture f;
  Session s = f.analyzed();
  REQUIRE(s.revisions.size() == 1);
  const auto& rainbow = rec_with_text(s, "Rainbow colormap");
  std::vector<std::string> ids = {rainbow.id};
  auto result = f.pipeline.apply(s.id, ids);
  CHECK(result.outcome.attempts == 1);
  CHECK(result.outcome.ok());
  CHECK(result.revision_index == 1);
  const Session& after = result.session;
  CHECK(after.revisions.size() == 2);
  CHECK(after.state == SessionState::kRefining);
  CHECK(after.revisions[1].spec.validated);
  CHECK(after.revisions[1].spec.origin == SpecOrigin::kEdited);
  CHECK(after.revisions[1].spec.parent_revision == 0);
  CHECK(after.revisions[1].spec.source.find("viridis") != std::string::npos);
  CHECK(after.revisions[1].spec.source.find("jet") == std::string::npos);
  CHECK(after.revisions[1].render->ok());
  CHECK(after.find_recommendation(rainbow.id)->status == RecStatus::kApplied);
  CHECK(after.revisions[1].applied_recommendation_ids == ids);
  CHECK(f.pipeline.load(s.id) == after);
  CHECK(check_invariants(after).empty());
}

TEST_CASE("apply: one broken edit then a valid one takes two attempts") {
  MockCriticOptions o;
  o.broken_edits = 1;
  Fixture f(o);
  Session s = f.analyzed();
  std::vector<std::string> ids = {rec_with_text(s, "Legend").id};
  auto result = f.pipeline.apply(s.id, ids);
  CHECK(result.outcome.attempts == 2);
  CHECK(result.outcome.raw_completions.size() == 2);
  CHECK(result.session.revisions.size() == 2);
  // The retry prompt carried the render error back to the model.
  auto prompts = f.mocks.critic->prompts();
  CHECK(prompts.back().find("Your previous attempt failed to render") != std::string::npos);
}

TEST_CASE("apply: exhausted attempts raise RenderValidationFailed and add nothing") {
  MockCriticOptions o;
  o.always_broken_edits = true;
  Fixture f(o);
  Session s = f.analyzed();
  std::vector<std::string> ids = {rec_with_text(s, "Legend").id, rec_with_text(s, "Tick").id};
  auto e = error_of([&] { f.pipeline.apply(s.id, ids); });
  CHECK(e.code() == ErrorCode::kRenderValidationFailed);
  CHECK(e.detail().at("attempts") == 3);
  CHECK_FALSE(e.detail().at("failure_reason").get<std::string>().empty());
  CHECK(f.mocks.critic->edit_calls() == 3);
  Session after = f.pipeline.load(s.id);
  CHECK(after.revisions.size() == 1);
  for (const auto& id : ids) CHECK(after.find_recommendation(id)->status == RecStatus::kSelected);
  CHECK(after.audit.back().event == "apply_failed");
  CHECK(check_invariants(after).empty());
}

TEST_CASE("apply: bad requests") {
  Fixture f;
  Session s = f.analyzed();
  CHECK(error_code_of([&] { f.pipeline.apply(s.id, std::vector<std::string>{"no-such-rec"}); }) ==
        ErrorCode::kUnknownRecommendation);
  CHECK(error_code_of([&] { f.pipeline.apply(s.id, std::vector<std::string>{}); }) ==
        ErrorCode::kPreconditionViolated);
  CHECK(f.pipeline.load(s.id).revisions.size() == 1);

  Session fresh = f.pipeline.create_session(testsupport::make_png(5, 5, 3));
  CHECK(error_code_of([&] { f.pipeline.apply(fresh.id, std::vector<std::string>{"x"}); }) == ErrorCode::kConflict);
}

TEST_CASE("reanalyze: rounds 1 then 2, earlier rounds untouched") {
  Fixture f;
  Session s = f.analyzed();
  const auto round0 = s.recommendations;
  CHECK(std::all_of(round0.begin(), round0.end(), [](const Recommendation& r) { return r.round == 0; }));
  f.pipeline.apply(s.id, std::vector<std::string>{rec_with_text(s, "Rainbow").id});

  auto r1 = f.pipeline.reanalyze(s.id);
  CHECK(r1.round.round == 1);
  CHECK_FALSE(r1.round.new_ids.empty());
  for (const auto& id : r1.round.new_ids) CHECK(r1.session.find_recommendation(id)->round == 1);
  for (std::size_t i = 0; i < round0.size(); ++i) {
    CHECK(r1.session.recommendations[i].text == round0[i].text);
    CHECK(r1.session.recommendations[i].round == 0);
  }
  CHECK(r1.session.state == SessionState::kAnalyzed);

  auto r2 = f.pipeline.reanalyze(s.id);
  CHECK(r2.round.round == 2);
  CHECK(r2.session.latest_round() == 2);
  CHECK(check_invariants(r2.session).empty());
}

TEST_CASE("reanalyze: latest revision must be validated") {
  Fixture f;
  Session s = f.analyzed();
  s.revisions.back().spec.validated = false;
  SeededIdSource ids(1);
  CHECK(error_code_of([&] { reanalyze(s, f.pipeline.config().llm, *f.mocks.critic, ids, testsupport::fixed_clock()); }) ==
        ErrorCode::kPreconditionViolated);
}

TEST_CASE("record_round: duplicates within a round and against applied texts are dropped") {
  Session s = create_session("s", make_chart_image("i", testsupport::make_png(4, 4)), {});
  ChartSpec base;
  base.source = "plt.plot([1])";
  base.validated = true;
  RenderResult rendered;
  rendered.status = RenderStatus::kSuccess;
  rendered.image = make_chart_image("r", testsupport::make_png(4, 4, 1));
  append_revision(s, base, {}, rendered, {});
  Recommendation applied;
  applied.id = "old";
  applied.session_id = "s";
  applied.text = "Legend overlaps data";
  applied.raw_line = "# Legend overlaps data";
  applied.status = RecStatus::kApplied;
  s.recommendations.push_back(applied);

  CritiqueOutcome outcome;
  outcome.raw_completion = "# Title missing\n# title  missing.\n# legend overlaps data!\n# Axis unlabeled";
  outcome.report = parse_recommendations(outcome.raw_completion);
  SeededIdSource ids(3);
  auto round = record_round(s, 1, outcome, ids, testsupport::fixed_clock());
  CHECK(round.new_ids.size() == 2);
  CHECK(round.dropped == std::vector<std::string>{"title  missing.", "legend overlaps data!"});
  CHECK(s.recommendations.size() == 3);
  CHECK(s.state == SessionState::kAnalyzed);
  CHECK(std::any_of(s.audit.begin(), s.audit.end(), [](const AuditEntry& a) { return a.event == "duplicate_of_applied"; }));
  CHECK(s.raw_completions.back().text == outcome.raw_completion);
}

TEST_CASE("property: revisions grow by exactly one on success and zero on failure") {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    Fixture f;
    Session s = f.analyzed();
    for (int step = 0; step < 5; ++step) {
      Session before = f.pipeline.load(s.id);
      auto open = ids_where(before, [](const Recommendation& r) {
        return r.status == RecStatus::kProposed || r.status == RecStatus::kSelected;
      });
      if (open.empty()) {
        f.pipeline.reanalyze(s.id);
        continue;
      }
      std::shuffle(open.begin(), open.end(), rng);
      open.resize(1 + rng() % std::min<std::size_t>(open.size(), 2));

      auto& opts = f.mocks.critic->options();
      const int fault = static_cast<int>(rng() % 4);
      opts.always_broken_edits = fault == 1;
      opts.unreachable = fault == 2;
      opts.transient_failures = fault == 3 ? 1 : 0;

      bool ok = true;
      try {
        f.pipeline.apply(s.id, open);
      } catch (const Error& e) {
        ok = false;
        CHECK((e.code() == ErrorCode::kRenderValidationFailed || e.code() == ErrorCode::kBackendUnreachable));
      }
      opts.always_broken_edits = false;
      opts.unreachable = false;
      opts.transient_failures = 0;

      Session after = f.pipeline.load(s.id);
      CAPTURE(fault);
      CHECK(ok == (fault == 0 || fault == 3));
      CHECK(after.revisions.size() == before.revisions.size() + (ok ? 1 : 0));
      for (const auto& id : open) {
        CHECK(after.find_recommendation(id)->status == (ok ? RecStatus::kApplied : RecStatus::kSelected));
      }
      for (std::size_t i = 0; i < after.revisions.size(); ++i) CHECK(after.revisions[i].index == static_cast<int>(i));
      CHECK(check_invariants(after).empty());
    }
  }
}

TEST_CASE("loop closure: derender, critique, apply, reanalyze keep every invariant") {
  Fixture f;
  Session s = f.analyzed();
  CHECK(check_invariants(s).empty());
  auto all = ids_where(s, [](const Recommendation& r) { return r.status == RecStatus::kProposed; });
  auto applied = f.pipeline.apply(s.id, all);
  CHECK(check_invariants(applied.session).empty());
  auto again = f.pipeline.reanalyze(s.id);
  CHECK(check_invariants(again.session).empty());
  // Every rule the mock knows how to fix was fixed, so nothing is re-reported.
  CHECK(again.round.report.empty());
}

TEST_SUITE_END();
