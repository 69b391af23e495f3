#include "chart_refinery/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "chart_refinery/critique/critique.hpp"
#include "chart_refinery/derender/derender.hpp"
#include "chart_refinery/error.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery {
namespace fs = std::filesystem;

Pipeline::Pipeline(AppConfig cfg, Backends backends, std::shared_ptr<IdSource> ids, Clock clock)
    : cfg_(std::move(cfg)),
      backends_(std::move(backends)),
      ids_(ids ? std::move(ids) : std::make_shared<RandomIdSource>()),
      clock_(std::move(clock)),
      store_(cfg_.store_root),
      sandbox_(cfg_.sandbox, clock_) {}

Session Pipeline::create_session(std::vector<std::uint8_t> bytes,
                                 std::optional<ImageFormat> declared) {
  const std::string id = ids_->next();
  ChartImage image = make_chart_image("upload-" + id.substr(0, 16), std::move(bytes), declared,
                                      cfg_.image_size_cap);
  Session s = chart_refinery::create_session(id, std::move(image), clock_.wall());
  s.backend_config_snapshot = cfg_.backend_snapshot();
  s.audit.push_back({clock_.wall(), "created", {{"sha256", s.image.sha256}}});
  store_.save(s);
  return s;
}

AnalyzeResult Pipeline::analyze(const std::string& id) {
  AnalyzeResult result;
  Session s = store_.load(id);
  if (s.state != SessionState::kCreated && s.state != SessionState::kDerendered) {
    throw Error(ErrorCode::kConflict, "cannot analyze in state " + std::string(to_string(s.state)),
                {{"state", to_string(s.state)}});
  }
  if (s.state == SessionState::kCreated) {
    DerenderResult dr;
    try {
      dr = derender(s.image, cfg_.derender, *backends_.chart_to_code, clock_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyCompletion) throw;
      s.state = SessionState::kFailed;
      s.audit.push_back({clock_.wall(), "derender_failed", {{"error", e.what()}}});
      store_.save(s);
      throw;
    }
    RenderResult render = sandbox_.render(dr.spec);
    dr.spec.validated = render.ok();
    append_revision(s, dr.spec, {}, render, clock_.wall());
    s.state = SessionState::kDerendered;
    s.audit.push_back({clock_.wall(), "derendered",
                       {{"model", dr.model_name}, {"attempts", dr.attempts},
                        {"render_status", to_string(render.status)}}});
    store_.save(s);
    result.derendered_now = true;
  }
  CritiqueOutcome outcome = critique(s.revisions.front().spec, cfg_.llm, *backends_.llm);
  result.round = record_round(s, 0, outcome, *ids_, clock_);
  store_.save(s);
  result.session = std::move(s);
  return result;
}

ApplyResult Pipeline::apply(const std::string& id, std::span<const std::string> rec_ids) {
  Session s = store_.load(id);
  ApplyResult result;
  try {
    result.outcome = apply_recommendations(s, rec_ids, cfg_.llm, cfg_.refine, *backends_.llm,
                                           sandbox_, clock_);
  } catch (const Error&) {
    // Keep selections and the audit trail; revisions are untouched.
    store_.save(s);
    throw;
  }
  result.revision_index = s.revisions.back().index;
  store_.save(s);
  result.session = std::move(s);
  return result;
}

ReanalyzeResult Pipeline::reanalyze(const std::string& id) {
  Session s = store_.load(id);
  ReanalyzeResult result;
  result.round = chart_refinery::reanalyze(s, cfg_.llm, *backends_.llm, *ids_, clock_);
  store_.save(s);
  result.session = std::move(s);
  return result;
}

std::vector<std::string> Pipeline::recommendations_for_image(const ChartImage& image) {
  DerenderResult dr = derender(image, cfg_.derender, *backends_.chart_to_code, clock_);
  CritiqueOutcome outcome = critique(dr.spec, cfg_.llm, *backends_.llm);
  return dedupe(outcome.report.texts());
}

analytics::EvalCorpus collect_corpus(const fs::path& dir, Pipeline& pipeline) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kInvalidInput, "corpus directory not found: " + dir.string());
  }
  if (fs::exists(dir / "recommendations.txt")) {
    auto corpus = analytics::read_recs_file(dir / "recommendations.txt");
    if (corpus.texts.empty()) throw Error(ErrorCode::kInvalidInput, "recommendations.txt is empty");
    return corpus;
  }
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = to_lower(entry.path().extension().string());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  if (images.empty()) throw Error(ErrorCode::kInvalidInput, "corpus has no images: " + dir.string());

  analytics::EvalCorpus corpus;
  for (const auto& path : images) {
    std::ifstream in(path, std::ios::binary);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
    std::vector<std::string> texts;
    try {
      ChartImage image = make_chart_image(path.filename().string(), std::move(bytes), std::nullopt,
                                          pipeline.config().image_size_cap);
      texts = pipeline.recommendations_for_image(image);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidImage || e.code() == ErrorCode::kEmptyCompletion ||
          e.code() == ErrorCode::kSpecTooLarge) {
        continue;
      }
      throw;
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
      corpus.ids.push_back(path.filename().string() + "#" + std::to_string(i + 1));
      corpus.texts.push_back(texts[i]);
    }
  }
  if (corpus.texts.empty()) {
    throw Error(ErrorCode::kInvalidInput, "corpus produced no recommendations");
  }
  return corpus;
}

analytics::EvalCorpus corpus_from_sessions(const SessionStore& store,
                                           std::span<const std::string> session_ids) {
  analytics::EvalCorpus corpus;
  for (const auto& sid : session_ids) {
    Session s = store.load(sid);
    for (const auto& rec : s.recommendations) {
      corpus.ids.push_back(rec.id);
      corpus.texts.push_back(rec.text);
    }
  }
  return corpus;
}

}  // namespace chart_refinery
