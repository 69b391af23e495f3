#include <doctest.h>

#include <random>

#include "chart_refinery/error.hpp"
#include "chart_refinery/session/clock.hpp"
#include "chart_refinery/session/hashing.hpp"
#include "chart_refinery/session/image.hpp"
#include "chart_refinery/session/session.hpp"
#include "test_support.hpp"

using namespace chart_refinery;
using testsupport::make_png;

namespace {

ChartImage png_image(std::uint32_t w = 4, std::uint32_t h = 3) {
  return make_chart_image("img", make_png(w, h));
}

RenderResult ok_render() {
  RenderResult r;
  r.status = RenderStatus::kSuccess;
  r.image = png_image(8, 6);
  return r;
}

Recommendation rec(const Session& s, const std::string& id, int round = 0) {
  Recommendation r;
  r.id = id;
  r.session_id = s.id;
  r.round = round;
  r.text = "Issue " + id;
  r.raw_line = "# Issue " + id;
  return r;
}

ChartSpec spec(const std::string& source, bool validated = false) {
  ChartSpec s;
  s.source = source;
  s.validated = validated;
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInternal;
}

}  // namespace

TEST_SUITE_BEGIN("session-core");

TEST_CASE("image: png dimensions and hash come from the payload") {
  auto bytes = make_png(37, 21, 5);
  ChartImage img = make_chart_image("a", bytes);
  CHECK(img.format == ImageFormat::kPng);
  CHECK(img.width_px == 37);
  CHECK(img.height_px == 21);
  CHECK(img.sha256 == sha256_hex(bytes));
  CHECK(check_image(img).empty());
}

TEST_CASE("image: jpeg SOF header gives dimensions") {
  ChartImage img = make_chart_image("j", testsupport::make_jpeg_header(640, 480));
  CHECK(img.format == ImageFormat::kJpeg);
  CHECK(img.width_px == 640);
  CHECK(img.height_px == 480);
}

TEST_CASE("image: empty, mismatched, unknown and oversized payloads are rejected") {
  CHECK(code_of([] { make_chart_image("z", {}); }) == ErrorCode::kInvalidImage);
  CHECK(code_of([] { make_chart_image("m", make_png(2, 2), ImageFormat::kJpeg); }) ==
        ErrorCode::kInvalidImage);
  CHECK(code_of([] { make_chart_image("g", {'G', 'I', 'F', '8', '9', 'a'}); }) ==
        ErrorCode::kInvalidImage);

  auto big = make_png(64, 64, 1);
  try {
    make_chart_image("b", big, std::nullopt, big.size() - 1);
    FAIL("expected InvalidImage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidImage);
    CHECK(e.detail().at("size_cap").get<std::size_t>() == big.size() - 1);
  }
}

TEST_CASE("image: tampering is caught by check_image") {
  ChartImage img = png_image();
  img.bytes.back() ^= 0xFF;
  CHECK_FALSE(check_image(img).empty());
}

TEST_CASE("timestamps: rfc3339 round trip and malformed input") {
  for (std::int64_t ms : {0LL, 1767225600123LL, 951782400999LL}) {
    Timestamp t{ms};
    CHECK(parse_rfc3339(format_rfc3339(t)) == t);
  }
  CHECK(format_rfc3339({0}) == "1970-01-01T00:00:00.000Z");
  CHECK(code_of([] { parse_rfc3339("yesterday"); }) == ErrorCode::kCorruptRecord);
}

TEST_CASE("ids: seeded sources repeat, 128-bit hex") {
  SeededIdSource a(9), b(9);
  for (int i = 0; i < 5; ++i) {
    auto x = a.next();
    CHECK(x == b.next());
    CHECK(x.size() == 32);
    CHECK(x.find_first_not_of("0123456789abcdef") == std::string::npos);
  }
  RandomIdSource r;
  CHECK(r.next() != r.next());
}

TEST_CASE("create_session: CREATED with nothing recorded") {
  Session s = create_session("s1", png_image(), {42});
  CHECK(s.state == SessionState::kCreated);
  CHECK(s.revisions.empty());
  CHECK(s.recommendations.empty());
  CHECK(s.latest_round() == -1);
  CHECK(check_invariants(s).empty());
}

TEST_CASE("append_revision: indices are contiguous from 0") {
  Session s = create_session("s1", png_image(), {});
  CHECK(append_revision(s, spec("a = 1"), {}, std::nullopt, {}).index == 0);
  s.recommendations.push_back(rec(s, "r1"));
  select_recommendations(s, std::vector<std::string>{"r1"});
  std::vector<std::string> ids = {"r1"};
  const Revision& r1 = append_revision(s, spec("a = 2", true), ids, ok_render(), {});
  CHECK(r1.index == 1);
  CHECK(s.find_recommendation("r1")->status == RecStatus::kApplied);
}

TEST_CASE("append_revision: errors leave the session untouched") {
  Session s = create_session("s1", png_image(), {});
  std::vector<std::string> r1 = {"r1"};
  CHECK(code_of([&] { append_revision(s, spec("x"), r1, std::nullopt, {}); }) ==
        ErrorCode::kPreconditionViolated);
  append_revision(s, spec("x"), {}, std::nullopt, {});
  s.recommendations.push_back(rec(s, "r1"));

  const Session before = s;
  std::vector<std::string> unknown = {"nope"};
  CHECK(code_of([&] { append_revision(s, spec("y"), unknown, std::nullopt, {}); }) ==
        ErrorCode::kUnknownRecommendation);
  // PROPOSED cannot jump straight to APPLIED.
  CHECK(code_of([&] { append_revision(s, spec("y"), r1, std::nullopt, {}); }) ==
        ErrorCode::kIllegalStatusTransition);
  CHECK(code_of([&] { append_revision(s, spec("y", true), {}, std::nullopt, {}); }) ==
        ErrorCode::kPreconditionViolated);
  CHECK(code_of([&] { append_revision(s, spec(""), {}, std::nullopt, {}); }) ==
        ErrorCode::kPreconditionViolated);
  CHECK(s == before);
}

TEST_CASE("status machine: allowed moves") {
  CHECK(transition_allowed(RecStatus::kProposed, RecStatus::kSelected));
  CHECK(transition_allowed(RecStatus::kProposed, RecStatus::kDismissed));
  CHECK(transition_allowed(RecStatus::kSelected, RecStatus::kApplied));
  CHECK_FALSE(transition_allowed(RecStatus::kProposed, RecStatus::kApplied));
  CHECK_FALSE(transition_allowed(RecStatus::kApplied, RecStatus::kProposed));
  CHECK_FALSE(transition_allowed(RecStatus::kDismissed, RecStatus::kSelected));
  CHECK_FALSE(transition_allowed(RecStatus::kSelected, RecStatus::kSelected));
}

TEST_CASE("property: random operation sequences never reach an illegal status") {
  // Reference model: only the edges PROPOSED->SELECTED, PROPOSED->DISMISSED,
  // SELECTED->APPLIED exist; APPLIED and DISMISSED are terminal.
  auto legal = [](RecStatus from, RecStatus to) {
    return (from == RecStatus::kProposed && (to == RecStatus::kSelected || to == RecStatus::kDismissed)) ||
           (from == RecStatus::kSelected && to == RecStatus::kApplied);
  };
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    Session s = create_session("s", png_image(), {});
    append_revision(s, spec("base"), {}, std::nullopt, {});
    for (int i = 0; i < 6; ++i) s.recommendations.push_back(rec(s, "r" + std::to_string(i)));
    std::vector<RecStatus> model(6, RecStatus::kProposed);
    for (int step = 0; step < 25; ++step) {
      const int target = static_cast<int>(rng() % 6);
      const std::string id = "r" + std::to_string(target);
      const int op = static_cast<int>(rng() % 3);
      const RecStatus want = op == 0 ? RecStatus::kSelected : op == 1 ? RecStatus::kDismissed : RecStatus::kApplied;
      const bool ok = legal(model[target], want) ||
                      (want == RecStatus::kSelected && model[target] == RecStatus::kSelected);
      try {
        if (op == 0) {
          select_recommendations(s, std::vector<std::string>{id});
        } else if (op == 1) {
          dismiss_recommendation(s, id);
        } else {
          std::vector<std::string> ids = {id};
          append_revision(s, spec("edit " + std::to_string(step), true), ids, ok_render(), {});
        }
        REQUIRE(ok);
        model[target] = want;
      } catch (const Error& e) {
        REQUIRE_FALSE(ok);
        REQUIRE(e.code() == ErrorCode::kIllegalStatusTransition);
      }
      for (int i = 0; i < 6; ++i) REQUIRE(s.recommendations[i].status == model[i]);
    }
    s.state = SessionState::kRefining;
    CHECK(check_invariants(s).empty());
  }
}

TEST_CASE("invariants: violations are reported") {
  Session s = create_session("s", png_image(), {});
  s.state = SessionState::kAnalyzed;  // no round, no revision
  CHECK(check_invariants(s).size() >= 2);

  Session t = create_session("t", png_image(), {});
  append_revision(t, spec("x"), {}, std::nullopt, {});
  auto r = rec(t, "r1");
  r.text = "two\nlines";
  t.recommendations.push_back(r);
  t.recommendations.push_back(rec(t, "r1"));
  auto problems = check_invariants(t);
  CHECK(problems.size() >= 2);
}

TEST_CASE("enums: names round trip") {
  for (auto v : {SessionState::kCreated, SessionState::kDerendered, SessionState::kAnalyzed,
                 SessionState::kRefining, SessionState::kFailed}) {
    CHECK(session_state_from_string(to_string(v)) == v);
  }
  for (auto v : {RecStatus::kProposed, RecStatus::kSelected, RecStatus::kApplied, RecStatus::kDismissed}) {
    CHECK(rec_status_from_string(to_string(v)) == v);
  }
  for (auto v : {RenderStatus::kSuccess, RenderStatus::kCodeError, RenderStatus::kTimeout,
                 RenderStatus::kOutputMissing}) {
    CHECK(render_status_from_string(to_string(v)) == v);
  }
  CHECK(to_string(SessionState::kAnalyzed) == "ANALYZED");
}

TEST_CASE("hashing: known sha256 vectors") {
  CHECK(sha256_hex(std::string_view("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string_view("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_SUITE_END();
