#include "chart_refinery/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <regex>
#include <sstream>

#include "chart_refinery/analytics/artifacts.hpp"
#include "chart_refinery/analytics/evaluation.hpp"
#include "chart_refinery/pipeline.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery::cli {
namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kInvalidImage:
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kPreconditionViolated:
    case ErrorCode::kNotFound:
    case ErrorCode::kCorruptRecord:
    case ErrorCode::kUnknownRecommendation:
    case ErrorCode::kIllegalStatusTransition:
    case ErrorCode::kConflict:
    case ErrorCode::kTooFewRows:
    case ErrorCode::kDegenerateCentroids:
    case ErrorCode::kUnclusterableCorpus:
      return kExitUsage;
    default:
      return kExitBackend;
  }
}

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool json_output = false;
  int verbosity = 0;

  void log(const std::string& line) const {
    if (verbosity > 0) err << line << '\n';
  }
  void emit(const json& doc) const { out << doc.dump(2, ' ', false, json::error_handler_t::replace) << '\n'; }
};

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in || fs::is_directory(path)) {
    throw Error(ErrorCode::kInvalidInput, "cannot read " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes revisions/<n>.py (and .png when rendered) next to session.json.
std::pair<fs::path, std::optional<fs::path>> export_revision(const SessionStore& store,
                                                             const Session& s, const Revision& rev) {
  const fs::path dir = store.session_dir(s.id) / "revisions";
  fs::create_directories(dir);
  const fs::path py = dir / (std::to_string(rev.index) + ".py");
  std::ofstream(py, std::ios::trunc) << rev.spec.source;
  std::optional<fs::path> png;
  if (rev.render && rev.render->image) {
    const auto& img = *rev.render->image;
    png = dir / (std::to_string(rev.index) + (img.format == ImageFormat::kPng ? ".png" : ".jpg"));
    std::ofstream(*png, std::ios::binary | std::ios::trunc)
        .write(reinterpret_cast<const char*>(img.bytes.data()), static_cast<std::streamsize>(img.bytes.size()));
  }
  return {py, png};
}

// 1-based position in the session's recommendation list; stable across rounds.
std::size_t rec_number(const Session& s, const std::string& id) {
  for (std::size_t i = 0; i < s.recommendations.size(); ++i) {
    if (s.recommendations[i].id == id) return i + 1;
  }
  return 0;
}

json rec_json(const Session& s, const std::string& id) {
  const Recommendation* r = s.find_recommendation(id);
  return {{"index", rec_number(s, id)},
          {"id", r->id},
          {"round", r->round},
          {"status", to_string(r->status)},
          {"text", r->text}};
}

void print_round(const Context& ctx, const Session& s, const RoundOutcome& round,
                 const SessionStore& store, const char* verb) {
  const Revision& rev = *s.latest_revision();
  auto [py, png] = export_revision(store, s, rev);
  json warnings = json::array();
  if (round.report.empty()) warnings.push_back("NO_RECOMMENDATIONS");
  if (ctx.json_output) {
    json recs = json::array();
    for (const auto& id : round.new_ids) recs.push_back(rec_json(s, id));
    ctx.emit({{"command", verb},
              {"session_id", s.id},
              {"state", to_string(s.state)},
              {"round", round.round},
              {"revision", rev.index},
              {"spec_path", py.string()},
              {"image_path", png ? json(png->string()) : json(nullptr)},
              {"render_status", rev.render ? json(to_string(rev.render->status)) : json(nullptr)},
              {"recommendations", std::move(recs)},
              {"warnings", std::move(warnings)}});
    return;
  }
  ctx.out << "session " << s.id << '\n';
  ctx.out << "spec " << py.string() << '\n';
  if (png) ctx.out << "image " << png->string() << '\n';
  if (rev.render && !rev.render->ok()) {
    ctx.err << "warning: revision " << rev.index << " did not render ("
            << to_string(rev.render->status) << ")\n";
  }
  for (const auto& id : round.new_ids) {
    ctx.out << '[' << rec_number(s, id) << "] " << s.find_recommendation(id)->text << '\n';
  }
  if (round.report.empty()) ctx.err << "warning: the model returned no '#' recommendations\n";
}

std::vector<std::size_t> parse_indices(const std::string& text) {
  static const std::regex number(R"(^\s*(\d{1,6})\s*$)");
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::smatch m;
    if (!std::regex_match(part, m, number)) {
      throw Error(ErrorCode::kInvalidInput, "invalid recommendation index '" + part + "'");
    }
    out.push_back(std::stoul(m[1]));
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidInput, "--recs needs at least one index");
  return out;
}

std::pair<int, int> parse_k_range(const std::string& text) {
  static const std::regex re(R"(^\s*(\d{1,4})\s*:\s*(\d{1,4})\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    throw Error(ErrorCode::kInvalidInput, "--k-range must look like 2:20");
  }
  return {std::stoi(m[1]), std::stoi(m[2])};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Hooks& hooks) {
  CLI::App app{"Chart refinement assistant: de-render, critique and refine charts", "refine"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  Context ctx{out, err};
  app.add_option("--config", config_path, "JSON config file (default: $CHART_REFINERY_CONFIG)");
  app.add_flag("--json", ctx.json_output, "Print one JSON document on stdout");
  app.add_flag("-v,--verbose", ctx.verbosity, "Progress on stderr (repeat for more)");

  std::string session_dir;
  auto add_session_dir = [&](CLI::App* sub) {
    sub->add_option("--session-dir", session_dir, "Session store directory");
  };

  std::string image_path;
  auto* analyze = app.add_subcommand("analyze", "Upload a chart, de-render it and list recommendations");
  analyze->add_option("image", image_path, "PNG or JPEG chart")->required();
  add_session_dir(analyze);

  std::string session_id;
  std::string recs;
  auto* apply = app.add_subcommand("apply", "Apply recommendations by number and render a new revision");
  apply->add_option("--session", session_id, "Session id")->required();
  apply->add_option("--recs", recs, "Comma-separated recommendation numbers, e.g. 1,3")->required();
  add_session_dir(apply);

  auto* reanalyze = app.add_subcommand("reanalyze", "Critique the latest revision again");
  reanalyze->add_option("--session", session_id, "Session id")->required();
  add_session_dir(reanalyze);

  auto* show = app.add_subcommand("show", "Print a session's recommendations and revisions");
  show->add_option("--session", session_id, "Session id")->required();
  add_session_dir(show);

  std::string corpus_dir, recs_file, out_dir, k_range, normalize = "none", projection_file, cache_dir;
  int seeds = 0;
  auto* eval = app.add_subcommand("eval", "Cluster recommendations over a corpus and write artifacts");
  eval->add_option("--corpus", corpus_dir, "Directory of chart images or a recommendations.txt");
  eval->add_option("--recs-file", recs_file, "Text file with one recommendation per line");
  eval->add_option("--k-range", k_range, "k sweep as min:max (default 2:20)");
  eval->add_option("--seeds", seeds, "Seeds per k (default 5)");
  eval->add_option("--out", out_dir, "Output directory")->required();
  eval->add_option("--normalize", normalize, "none | cosine")->check(CLI::IsMember({"none", "cosine"}));
  eval->add_option("--projection-file", projection_file, "Precomputed id,x,y coordinates");
  eval->add_option("--cache-dir", cache_dir, "Embedding cache (default <store>/embedding-cache)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    AppConfig cfg = resolve_config(config_path.empty() ? std::nullopt
                                                       : std::optional<fs::path>(config_path));
    if (!session_dir.empty()) cfg.store_root = session_dir;
    if (hooks.adjust_config) hooks.adjust_config(cfg);
    Backends backends = hooks.backends ? *hooks.backends : make_backends(cfg);
    Pipeline pipeline(cfg, backends, hooks.ids, hooks.clock ? *hooks.clock : Clock::system());

    if (analyze->parsed()) {
      if (!fs::is_regular_file(image_path)) {
        throw Error(ErrorCode::kInvalidInput, "image not found: " + image_path);
      }
      Session created = pipeline.create_session(read_file(image_path));
      ctx.log("created session " + created.id);
      AnalyzeResult result;
      try {
        result = pipeline.analyze(created.id);
      } catch (const Error&) {
        err << "session " << created.id << " was created; rerun analysis via the service or a new upload\n";
        throw;
      }
      print_round(ctx, result.session, result.round, pipeline.store(), "analyze");
      return kExitOk;
    }

    if (apply->parsed()) {
      Session s = pipeline.load(session_id);
      std::vector<std::string> ids;
      for (auto n : parse_indices(recs)) {
        if (n < 1 || n > s.recommendations.size()) {
          throw Error(ErrorCode::kInvalidInput,
                      "recommendation " + std::to_string(n) + " out of range 1.." +
                          std::to_string(s.recommendations.size()));
        }
        ids.push_back(s.recommendations[n - 1].id);
      }
      ApplyResult result = pipeline.apply(session_id, ids);
      const Revision& rev = result.session.revisions.back();
      auto [py, png] = export_revision(pipeline.store(), result.session, rev);
      if (ctx.json_output) {
        ctx.emit({{"command", "apply"},
                  {"session_id", session_id},
                  {"state", to_string(result.session.state)},
                  {"revision", rev.index},
                  {"attempts", result.outcome.attempts},
                  {"spec_path", py.string()},
                  {"image_path", png ? json(png->string()) : json(nullptr)},
                  {"applied", rev.applied_recommendation_ids}});
      } else {
        out << "revision " << rev.index << '\n';
        out << "spec " << py.string() << '\n';
        if (png) out << "image " << png->string() << '\n';
        ctx.log("edit attempts: " + std::to_string(result.outcome.attempts));
      }
      return kExitOk;
    }

    if (reanalyze->parsed()) {
      ReanalyzeResult result = pipeline.reanalyze(session_id);
      print_round(ctx, result.session, result.round, pipeline.store(), "reanalyze");
      return kExitOk;
    }

    if (show->parsed()) {
      Session s = pipeline.load(session_id);
      if (ctx.json_output) {
        ctx.emit(session_to_json(s));
        return kExitOk;
      }
      out << "session " << s.id << " " << to_string(s.state) << '\n';
      for (const auto& rev : s.revisions) {
        out << "revision " << rev.index << " "
            << (rev.render ? to_string(rev.render->status) : std::string_view("UNRENDERED")) << '\n';
      }
      for (std::size_t i = 0; i < s.recommendations.size(); ++i) {
        const auto& r = s.recommendations[i];
        out << '[' << i + 1 << "] (round " << r.round << ", " << to_string(r.status) << ") " << r.text
            << '\n';
      }
      return kExitOk;
    }

    if (eval->parsed()) {
      if (corpus_dir.empty() == recs_file.empty()) {
        throw Error(ErrorCode::kInvalidInput, "give exactly one of --corpus or --recs-file");
      }
      analytics::EvalOptions options = analytics::EvalOptions::from_config(cfg.analytics);
      if (!k_range.empty()) std::tie(options.k_min, options.k_max) = parse_k_range(k_range);
      if (seeds != 0) options.seeds = seeds;
      if (normalize == "cosine") options.normalize_cosine = true;
      if (!projection_file.empty()) options.projection_file = fs::path(projection_file);
      options.cache_dir = cache_dir.empty() ? cfg.store_root / "embedding-cache" : fs::path(cache_dir);
      analytics::check_eval_request(static_cast<std::size_t>(std::max(options.k_max, 1)),
                                    options.k_min, options.k_max, options.seeds);
      std::string last_phase;
      options.progress = [&](double f, const std::string& phase) {
        if (phase != last_phase) ctx.log(phase + " (" + std::to_string(static_cast<int>(f * 100)) + "%)");
        last_phase = phase;
      };

      ctx.log("collecting recommendations");
      analytics::EvalCorpus corpus = recs_file.empty() ? collect_corpus(corpus_dir, pipeline)
                                                       : analytics::read_recs_file(recs_file);
      if (corpus.texts.empty()) throw Error(ErrorCode::kInvalidInput, "corpus has no recommendations");
      auto result = analytics::run_evaluation(corpus, options, cfg.embedding, *backends.embedding, out_dir);

      if (ctx.json_output) {
        json doc = analytics::clusters_json(result.report, result.best, corpus.ids, corpus.texts);
        doc.erase("rows");
        doc["command"] = "eval";
        doc["recommendations"] = corpus.texts.size();
        doc["embeddings_cached"] = result.embeddings_cached;
        doc["out_dir"] = fs::path(out_dir).string();
        ctx.emit(doc);
      } else {
        out << "recommendations " << corpus.texts.size() << '\n';
        out << "selected k=" << result.report.selected_k << '\n';
        out << "davies-bouldin " << result.report.db_score << '\n';
        out << "artifacts " << fs::path(out_dir).string() << '\n';
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    const int rc = exit_code_for(e.code());
    err << "error: " << e.what() << " [" << to_string(e.code()) << "]\n";
    if (ctx.json_output) {
      ctx.emit({{"error", {{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}}},
                {"exit_code", rc}});
    }
    return rc;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    if (ctx.json_output) ctx.emit({{"error", {{"code", "INTERNAL"}, {"message", e.what()}}}, {"exit_code", kExitBackend}});
    return kExitBackend;
  }
  return kExitUsage;
}

}  // namespace chart_refinery::cli
