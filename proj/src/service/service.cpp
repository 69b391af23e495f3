#include "chart_refinery/service/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <regex>

#include "chart_refinery/analytics/artifacts.hpp"
#include "chart_refinery/analytics/evaluation.hpp"
#include "chart_refinery/backend/http_client.hpp"

namespace chart_refinery {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";
constexpr auto kDumpErrors = json::error_handler_t::replace;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, kDumpErrors), kJson);
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(api_error_code(e.code())), api_error_body(e));
}

// Runs a handler, turning every escaping exception into an ApiError body.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(ErrorCode::kInvalidInput, std::string("malformed JSON: ") + e.what()));
    } catch (const std::exception& e) {
      send_error(res, Error(ErrorCode::kInternal, e.what()));
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body);
  if (!body.is_object()) throw Error(ErrorCode::kInvalidInput, "request body must be a JSON object");
  return body;
}

json recommendations_json(const Session& s, const std::vector<std::string>& ids) {
  json doc = session_to_json(s);
  json out = json::array();
  for (const auto& rec : doc.at("recommendations")) {
    if (std::find(ids.begin(), ids.end(), rec.at("id").get<std::string>()) != ids.end()) {
      out.push_back(rec);
    }
  }
  return out;
}

json round_json(const Session& s, const RoundOutcome& round) {
  json warnings = json::array();
  if (round.report.empty()) warnings.push_back("NO_RECOMMENDATIONS");
  const Revision* latest = s.latest_revision();
  return {{"id", s.id},
          {"state", to_string(s.state)},
          {"round", round.round},
          {"spec", latest ? json{{"revision", latest->index},
                                 {"source", latest->spec.source},
                                 {"validated", latest->spec.validated}}
                          : json(nullptr)},
          {"recommendations", recommendations_json(s, round.new_ids)},
          {"dropped_duplicates", round.dropped},
          {"skipped_lines", round.report.skipped_lines.size()},
          {"total_lines", round.report.total_lines},
          {"warnings", std::move(warnings)}};
}

std::optional<ImageFormat> declared_format(const std::string& content_type) {
  if (content_type == "image/png") return ImageFormat::kPng;
  if (content_type == "image/jpeg" || content_type == "image/jpg") return ImageFormat::kJpeg;
  return std::nullopt;
}

std::pair<int, int> parse_k_range(const json& v) {
  if (v.is_array() && v.size() == 2) return {v[0].get<int>(), v[1].get<int>()};
  if (v.is_object()) return {v.at("min").get<int>(), v.at("max").get<int>()};
  if (v.is_string()) {
    static const std::regex re(R"(^\s*(\d+)\s*[:.-]+\s*(\d+)\s*$)");
    std::smatch m;
    const std::string s = v.get<std::string>();
    if (std::regex_match(s, m, re)) return {std::stoi(m[1]), std::stoi(m[2])};
  }
  throw Error(ErrorCode::kInvalidInput, "k_range must be [min, max] or \"min:max\"");
}

std::size_t count_corpus_images(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (entry.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) ++n;
  }
  return n;
}

}  // namespace

std::string_view to_string(ApiErrorCode code) {
  switch (code) {
    case ApiErrorCode::kInvalidInput: return "INVALID_INPUT";
    case ApiErrorCode::kNotFound: return "NOT_FOUND";
    case ApiErrorCode::kConflict: return "CONFLICT";
    case ApiErrorCode::kBackendFailure: return "BACKEND_FAILURE";
    case ApiErrorCode::kInternal: return "INTERNAL";
  }
  return "INTERNAL";
}

ApiErrorCode api_error_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kInvalidImage:
    case ErrorCode::kPreconditionViolated:
    case ErrorCode::kTooFewRows:
      return ApiErrorCode::kInvalidInput;
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownRecommendation:
      return ApiErrorCode::kNotFound;
    case ErrorCode::kConflict:
    case ErrorCode::kIllegalStatusTransition:
      return ApiErrorCode::kConflict;
    case ErrorCode::kBackendUnreachable:
    case ErrorCode::kBackendTimeout:
    case ErrorCode::kBackendFailure:
    case ErrorCode::kEmptyCompletion:
    case ErrorCode::kSpecTooLarge:
    case ErrorCode::kRenderValidationFailed:
    case ErrorCode::kDimensionMismatch:
      return ApiErrorCode::kBackendFailure;
    default:
      return ApiErrorCode::kInternal;
  }
}

int http_status(ApiErrorCode code) {
  switch (code) {
    case ApiErrorCode::kInvalidInput: return 400;
    case ApiErrorCode::kNotFound: return 404;
    case ApiErrorCode::kConflict: return 409;
    case ApiErrorCode::kBackendFailure: return 502;
    case ApiErrorCode::kInternal: return 500;
  }
  return 500;
}

json api_error_body(const Error& error) {
  json detail = error.detail().is_object() ? error.detail() : json::object();
  detail["error"] = to_string(error.code());
  return {{"code", to_string(api_error_code(error.code()))},
          {"message", error.what()},
          {"detail", std::move(detail)}};
}

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::kQueued: return "QUEUED";
    case RunState::kRunning: return "RUNNING";
    case RunState::kSucceeded: return "SUCCEEDED";
    case RunState::kFailed: return "FAILED";
  }
  return "FAILED";
}

AnalyticsRunRequest AnalyticsRunRequest::from_json(const json& body,
                                                   const AnalyticsConfig& defaults) {
  AnalyticsRunRequest r;
  r.k_min = defaults.k_min;
  r.k_max = defaults.k_max;
  r.seeds = defaults.seeds_per_k;
  r.normalize_cosine = defaults.normalize_cosine;
  try {
    if (body.contains("corpus_dir")) r.corpus_dir = body.at("corpus_dir").get<std::string>();
    if (body.contains("session_ids")) r.session_ids = body.at("session_ids").get<std::vector<std::string>>();
    if (body.contains("k_range")) std::tie(r.k_min, r.k_max) = parse_k_range(body.at("k_range"));
    if (body.contains("seeds")) r.seeds = body.at("seeds").get<int>();
    if (body.contains("normalize")) {
      const auto& n = body.at("normalize");
      if (n.is_boolean()) {
        r.normalize_cosine = n.get<bool>();
      } else if (n.is_null() || n.get<std::string>() == "none") {
        r.normalize_cosine = false;
      } else if (n.get<std::string>() == "cosine") {
        r.normalize_cosine = true;
      } else {
        throw Error(ErrorCode::kInvalidInput, "normalize must be \"cosine\" or \"none\"");
      }
    }
    if (body.contains("projection_file")) r.projection_file = body.at("projection_file").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("malformed analytics request: ") + e.what());
  }
  if (r.corpus_dir.has_value() == !r.session_ids.empty()) {
    throw Error(ErrorCode::kInvalidInput, "give exactly one of corpus_dir or session_ids");
  }
  return r;
}

json AnalyticsRun::to_json() const {
  json j = {{"id", id},
            {"state", chart_refinery::to_string(state)},
            {"progress", progress},
            {"phase", phase},
            {"k_range", {request.k_min, request.k_max}},
            {"seeds", request.seeds}};
  j["report"] = report ? *report : json(nullptr);
  if (error) j["error"] = *error;
  return j;
}

AnalyticsRunner::AnalyticsRunner(Pipeline& pipeline, std::size_t workers) : pipeline_(pipeline) {
  for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) {
    threads_.emplace_back([this] { worker_loop(); });
  }
}

AnalyticsRunner::~AnalyticsRunner() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

std::string AnalyticsRunner::submit(AnalyticsRunRequest request) {
  // Size checks that need no backend calls happen here so bad requests fail
  // synchronously with 400.
  std::optional<std::size_t> known_rows;
  if (request.corpus_dir) {
    const fs::path dir = *request.corpus_dir;
    if (!fs::is_directory(dir)) {
      throw Error(ErrorCode::kInvalidInput, "corpus_dir is not a directory: " + dir.string());
    }
    if (fs::exists(dir / "recommendations.txt")) {
      known_rows = analytics::read_recs_file(dir / "recommendations.txt").texts.size();
    } else if (count_corpus_images(dir) == 0) {
      throw Error(ErrorCode::kInvalidInput, "corpus_dir holds no images or recommendations.txt");
    }
  } else {
    known_rows = corpus_from_sessions(pipeline_.store(), request.session_ids).texts.size();
  }
  analytics::check_eval_request(known_rows.value_or(static_cast<std::size_t>(request.k_max)),
                                request.k_min, request.k_max, request.seeds);

  AnalyticsRun run;
  run.id = ids_.next();
  run.request = std::move(request);
  run.out_dir = pipeline_.store().root() / "analytics" / run.id;
  {
    std::lock_guard lock(mu_);
    runs_[run.id] = run;
    queue_.push_back(run.id);
  }
  cv_.notify_one();
  return run.id;
}

std::optional<AnalyticsRun> AnalyticsRunner::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = runs_.find(id);
  if (it == runs_.end()) return std::nullopt;
  return it->second;
}

void AnalyticsRunner::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      runs_[id].state = RunState::kRunning;
      runs_[id].phase = "collecting";
    }
    execute(id);
  }
}

void AnalyticsRunner::execute(const std::string& id) {
  AnalyticsRunRequest request;
  fs::path out_dir;
  {
    std::lock_guard lock(mu_);
    request = runs_[id].request;
    out_dir = runs_[id].out_dir;
  }
  auto fail = [&](const Error& e) {
    std::lock_guard lock(mu_);
    auto& run = runs_[id];
    run.state = RunState::kFailed;
    run.phase = "failed";
    run.error = api_error_body(e);
  };
  try {
    analytics::EvalCorpus corpus =
        request.corpus_dir ? collect_corpus(*request.corpus_dir, pipeline_)
                           : corpus_from_sessions(pipeline_.store(), request.session_ids);
    const auto& cfg = pipeline_.config();
    analytics::EvalOptions options = analytics::EvalOptions::from_config(cfg.analytics);
    options.k_min = request.k_min;
    options.k_max = request.k_max;
    options.seeds = request.seeds;
    options.normalize_cosine = request.normalize_cosine;
    if (request.projection_file) options.projection_file = fs::path(*request.projection_file);
    options.cache_dir = pipeline_.store().root() / "embedding-cache";
    options.progress = [&](double f, const std::string& phase) {
      std::lock_guard lock(mu_);
      auto& run = runs_[id];
      run.progress = std::clamp(f, 0.0, 1.0);
      run.phase = phase;
    };
    auto result = analytics::run_evaluation(corpus, options, cfg.embedding,
                                            *pipeline_.backends().embedding, out_dir);
    json report = analytics::clusters_json(result.report, result.best, corpus.ids, corpus.texts);
    report.erase("rows");
    report["rows"] = corpus.texts.size();
    report["embeddings_cached"] = result.embeddings_cached;
    report["projection_method"] =
        result.projection.method == analytics::ProjectionMethod::kPca ? "PCA" : "EXTERNAL";
    report["artifacts"] = {{"dir", out_dir.string()},
                           {"embeddings", (out_dir / "embeddings.bin").string()},
                           {"clusters", (out_dir / "clusters.json").string()},
                           {"projection", (out_dir / "projection.csv").string()},
                           {"report", (out_dir / "report.md").string()}};
    std::lock_guard lock(mu_);
    auto& run = runs_[id];
    run.state = RunState::kSucceeded;
    run.progress = 1.0;
    run.phase = "done";
    run.report = std::move(report);
  } catch (const Error& e) {
    fail(e);
  } catch (const std::exception& e) {
    fail(Error(ErrorCode::kInternal, e.what()));
  }
}

Service::Service(Pipeline& pipeline)
    : pipeline_(pipeline),
      runner_(pipeline, pipeline.config().service.analytics_workers),
      server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::kInvalidConfig, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::listen_after_bind() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

void Service::routes() {
  auto& srv = *server_;
  const auto& cfg = pipeline_.config();
  const std::string ui_origin = cfg.service.ui_origin;
  // Room for a multipart envelope around an image at the cap, so oversize
  // uploads reach the handler and get a structured error.
  srv.set_payload_max_length(cfg.image_size_cap * 4 + (1u << 20));

  srv.set_post_routing_handler([ui_origin](const httplib::Request& req, httplib::Response& res) {
    if (!ui_origin.empty() && req.get_header_value("Origin") == ui_origin) {
      res.set_header("Access-Control-Allow-Origin", ui_origin);
      res.set_header("Vary", "Origin");
      res.set_header("Access-Control-Expose-Headers", "ETag");
    }
  });
  srv.Options(R"(/api/v1/.*)", [ui_origin](const httplib::Request& req, httplib::Response& res) {
    res.status = 204;
    if (req.get_header_value("Origin") == ui_origin) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, If-None-Match");
      res.set_header("Access-Control-Max-Age", "600");
    }
  });
  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const ErrorCode code = res.status == 404   ? ErrorCode::kNotFound
                           : res.status < 500 ? ErrorCode::kInvalidInput
                                              : ErrorCode::kInternal;
    json body = api_error_body(Error(code, "HTTP " + std::to_string(res.status) + " for " + req.path));
    res.set_content(body.dump(), kJson);
  });
  if (cfg.service.ui_dir && fs::is_directory(*cfg.service.ui_dir)) {
    srv.set_mount_point("/ui", cfg.service.ui_dir->string());
  }

  srv.Get("/api/v1/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
    const auto& c = pipeline_.config();
    auto probe = [](BackendKind kind, const std::string& url, double timeout) {
      const bool mock = kind == BackendKind::kMock;
      return json{{"backend", mock ? "mock" : "http"},
                  {"reachable", mock ? true : probe_reachable(url, std::min(timeout, 2.0))}};
    };
    send_json(res, 200,
              {{"status", "ok"},
               {"backends",
                {{"derender", probe(c.derender.kind, c.derender.endpoint_url, c.derender.timeout_s)},
                 {"llm", probe(c.llm.kind, c.llm.endpoint_url, c.llm.timeout_s)},
                 {"embedding", probe(c.embedding.kind, c.embedding.endpoint_url, c.embedding.timeout_s)}}}});
  }));

  srv.Post("/api/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("image")) {
      throw Error(ErrorCode::kInvalidInput, "multipart field 'image' is required");
    }
    const auto file = req.get_file_value("image");
    std::vector<std::uint8_t> bytes(file.content.begin(), file.content.end());
    Session s = pipeline_.create_session(std::move(bytes), declared_format(file.content_type));
    res.set_header("Location", "/api/v1/sessions/" + s.id);
    send_json(res, 201, {{"id", s.id}, {"state", to_string(s.state)}});
  }));

  srv.Get(R"(/api/v1/sessions/([0-9a-f]{32}))",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, session_to_json(pipeline_.load(req.matches[1])));
          }));

  auto leased = [this](const std::string& id) {
    auto lease = leases_.try_acquire(id);
    if (!lease) {
      throw Error(ErrorCode::kConflict, "another operation is in progress for this session",
                  {{"session_id", id}});
    }
    return lease;
  };

  srv.Post(R"(/api/v1/sessions/([0-9a-f]{32})/analyze)",
           guarded([this, leased](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             auto lease = leased(id);
             auto result = pipeline_.analyze(id);
             send_json(res, 200, round_json(result.session, result.round));
           }));

  srv.Post(R"(/api/v1/sessions/([0-9a-f]{32})/reanalyze)",
           guarded([this, leased](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             auto lease = leased(id);
             auto result = pipeline_.reanalyze(id);
             send_json(res, 200, round_json(result.session, result.round));
           }));

  srv.Post(R"(/api/v1/sessions/([0-9a-f]{32})/apply)",
           guarded([this, leased](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             json body = parse_body(req);
             if (!body.contains("recommendation_ids") || !body.at("recommendation_ids").is_array()) {
               throw Error(ErrorCode::kInvalidInput, "recommendation_ids must be an array");
             }
             auto ids = body.at("recommendation_ids").get<std::vector<std::string>>();
             if (ids.empty()) throw Error(ErrorCode::kInvalidInput, "recommendation_ids is empty");
             auto lease = leased(id);
             auto result = pipeline_.apply(id, ids);
             const Revision& rev = result.session.revisions.back();
             send_json(res, 200,
                       {{"id", id},
                        {"state", to_string(result.session.state)},
                        {"revision_index", result.revision_index},
                        {"render_status", to_string(result.outcome.render.status)},
                        {"attempts", result.outcome.attempts},
                        {"applied_recommendation_ids", rev.applied_recommendation_ids},
                        {"image_url", "/api/v1/sessions/" + id + "/revisions/" +
                                          std::to_string(rev.index) + "/image"}});
           }));

  srv.Get(R"(/api/v1/sessions/([0-9a-f]{32})/revisions/(\d+)/image)",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            Session s = pipeline_.load(req.matches[1]);
            const std::string n_text = req.matches[2];
            const auto n = n_text.size() > 6 ? -1 : std::stoi(n_text);
            if (n < 0 || n >= static_cast<int>(s.revisions.size())) {
              throw Error(ErrorCode::kNotFound, "no revision " + n_text);
            }
            const auto& rev = s.revisions[static_cast<std::size_t>(n)];
            if (!rev.render || !rev.render->image) {
              throw Error(ErrorCode::kNotFound, "revision " + n_text + " has no rendered image");
            }
            const ChartImage& img = *rev.render->image;
            const std::string etag = "\"" + img.sha256 + "\"";
            res.set_header("ETag", etag);
            res.set_header("Cache-Control", "no-cache");
            const std::string inm = req.get_header_value("If-None-Match");
            if (inm == etag || inm == img.sha256 || inm == "*") {
              res.status = 304;
              return;
            }
            res.status = 200;
            res.set_content(std::string(img.bytes.begin(), img.bytes.end()),
                            std::string(mime_type(img.format)));
          }));

  srv.Post("/api/v1/analytics/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto request = AnalyticsRunRequest::from_json(parse_body(req), pipeline_.config().analytics);
    const std::string id = runner_.submit(std::move(request));
    res.set_header("Location", "/api/v1/analytics/runs/" + id);
    send_json(res, 202, runner_.get(id)->to_json());
  }));

  srv.Get(R"(/api/v1/analytics/runs/([0-9a-f]{32}))",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto run = runner_.get(req.matches[1]);
            if (!run) throw Error(ErrorCode::kNotFound, "unknown analytics run");
            send_json(res, 200, run->to_json());
          }));
}

}  // namespace chart_refinery
