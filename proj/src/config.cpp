#include "chart_refinery/config.hpp"

#include <cstdlib>
#include <fstream>

#include "chart_refinery/backend/http_client.hpp"
#include "chart_refinery/error.hpp"

namespace chart_refinery {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, message);
}

BackendKind kind_from(const std::string& s) {
  if (s == "mock") return BackendKind::kMock;
  if (s == "http") return BackendKind::kHttp;
  throw Error(ErrorCode::kInvalidConfig, "backend must be \"mock\" or \"http\", got " + s);
}

std::string kind_name(BackendKind k) { return k == BackendKind::kMock ? "mock" : "http"; }

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

void read_path(const json& obj, const char* key, fs::path& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<std::string>();
}

void read_kind(const json& obj, BackendKind& out) {
  if (obj.contains("backend")) out = kind_from(obj.at("backend").get<std::string>());
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return (v && *v) ? v : nullptr;
}

}  // namespace

void DerenderBackendConfig::validate() const {
  require(timeout_s > 0, "derender.timeout_s must be > 0");
  require(max_retries >= 0, "derender.max_retries must be >= 0");
  if (kind == BackendKind::kHttp) parse_endpoint(endpoint_url);
}

void LlmBackendConfig::validate() const {
  require(timeout_s > 0, "llm.timeout_s must be > 0");
  require(max_retries >= 0, "llm.max_retries must be >= 0");
  require(temperature >= 0.0 && temperature <= 2.0, "llm.temperature must be in [0, 2]");
  require(max_prompt_chars > 0, "llm.max_prompt_chars must be > 0");
  if (kind == BackendKind::kHttp) parse_endpoint(endpoint_url);
}

void EmbeddingConfig::validate() const {
  require(timeout_s > 0, "embedding.timeout_s must be > 0");
  require(dims > 0, "embedding.dims must be > 0");
  require(batch_size > 0, "embedding.batch_size must be > 0");
  require(parallelism > 0, "embedding.parallelism must be > 0");
  if (kind == BackendKind::kHttp) parse_endpoint(endpoint_url);
}

void SandboxConfig::validate() const {
  require(timeout_s > 0, "sandbox.timeout_s must be > 0");
  require(pool_size > 0, "sandbox.pool_size must be > 0");
  std::error_code ec;
  require(fs::is_directory(workdir_root, ec),
          "sandbox.workdir_root does not exist: " + workdir_root.string());
}

json AppConfig::backend_snapshot() const {
  return {
      {"derender", {{"backend", kind_name(derender.kind)},
                    {"endpoint_url", derender.endpoint_url},
                    {"model_name", derender.model_name}}},
      {"llm", {{"backend", kind_name(llm.kind)},
               {"backend_style", llm.style == BackendStyle::kOllama ? "ollama" : "openai_chat"},
               {"endpoint_url", llm.endpoint_url},
               {"model_name", llm.model_name},
               {"temperature", llm.temperature}}},
      {"sandbox", {{"interpreter_path", sandbox.interpreter_path.string()},
                   {"timeout_s", sandbox.timeout_s}}},
  };
}

AppConfig config_from_json(const json& doc) {
  AppConfig cfg;
  try {
    read_path(doc, "store_root", cfg.store_root);
    read(doc, "image_size_cap", cfg.image_size_cap);
    if (doc.contains("derender")) {
      const auto& d = doc.at("derender");
      read_kind(d, cfg.derender.kind);
      read(d, "endpoint_url", cfg.derender.endpoint_url);
      read(d, "model_name", cfg.derender.model_name);
      read(d, "timeout_s", cfg.derender.timeout_s);
      read(d, "max_retries", cfg.derender.max_retries);
      read(d, "backoff_base_ms", cfg.derender.backoff_base_ms);
      read(d, "instruction", cfg.derender.instruction);
      read_path(d, "fixtures_dir", cfg.derender.fixtures_dir);
    }
    if (doc.contains("llm")) {
      const auto& l = doc.at("llm");
      read_kind(l, cfg.llm.kind);
      if (l.contains("backend_style")) {
        auto style = l.at("backend_style").get<std::string>();
        if (style == "ollama") {
          cfg.llm.style = BackendStyle::kOllama;
        } else if (style == "openai_chat") {
          cfg.llm.style = BackendStyle::kOpenAiChat;
        } else {
          throw Error(ErrorCode::kInvalidConfig, "llm.backend_style must be ollama or openai_chat");
        }
      }
      read(l, "endpoint_url", cfg.llm.endpoint_url);
      read(l, "model_name", cfg.llm.model_name);
      read(l, "temperature", cfg.llm.temperature);
      read(l, "timeout_s", cfg.llm.timeout_s);
      read(l, "max_retries", cfg.llm.max_retries);
      read(l, "backoff_base_ms", cfg.llm.backoff_base_ms);
      read(l, "max_prompt_chars", cfg.llm.max_prompt_chars);
      if (l.contains("api_key_env")) cfg.llm.api_key_env = l.at("api_key_env").get<std::string>();
    }
    if (doc.contains("embedding")) {
      const auto& e = doc.at("embedding");
      read_kind(e, cfg.embedding.kind);
      read(e, "endpoint_url", cfg.embedding.endpoint_url);
      read(e, "model_name", cfg.embedding.model_name);
      read(e, "dims", cfg.embedding.dims);
      read(e, "batch_size", cfg.embedding.batch_size);
      read(e, "parallelism", cfg.embedding.parallelism);
      read(e, "timeout_s", cfg.embedding.timeout_s);
      read(e, "max_retries", cfg.embedding.max_retries);
      read(e, "backoff_base_ms", cfg.embedding.backoff_base_ms);
      if (e.contains("api_key_env")) {
        cfg.embedding.api_key_env = e.at("api_key_env").is_null()
                                        ? std::nullopt
                                        : std::optional(e.at("api_key_env").get<std::string>());
      }
    }
    if (doc.contains("sandbox")) {
      const auto& s = doc.at("sandbox");
      read_path(s, "interpreter_path", cfg.sandbox.interpreter_path);
      read(s, "timeout_s", cfg.sandbox.timeout_s);
      read(s, "max_output_bytes", cfg.sandbox.max_output_bytes);
      read_path(s, "workdir_root", cfg.sandbox.workdir_root);
      read(s, "allow_network", cfg.sandbox.allow_network);
      read(s, "pool_size", cfg.sandbox.pool_size);
      if (s.contains("capture_format")) {
        auto f = s.at("capture_format").get<std::string>();
        require(f == "png" || f == "svg", "sandbox.capture_format must be png or svg");
        cfg.sandbox.capture_format = f == "png" ? CaptureFormat::kPng : CaptureFormat::kSvg;
      }
    }
    if (doc.contains("refine")) read(doc.at("refine"), "max_edit_attempts", cfg.refine.max_edit_attempts);
    if (doc.contains("analytics")) {
      const auto& a = doc.at("analytics");
      read(a, "k_min", cfg.analytics.k_min);
      read(a, "k_max", cfg.analytics.k_max);
      read(a, "seeds_per_k", cfg.analytics.seeds_per_k);
      read(a, "normalize_cosine", cfg.analytics.normalize_cosine);
      read(a, "threads", cfg.analytics.threads);
    }
    if (doc.contains("service")) {
      const auto& s = doc.at("service");
      read(s, "host", cfg.service.host);
      read(s, "port", cfg.service.port);
      read(s, "ui_origin", cfg.service.ui_origin);
      if (s.contains("ui_dir") && !s.at("ui_dir").is_null()) {
        cfg.service.ui_dir = fs::path(s.at("ui_dir").get<std::string>());
      }
      read(s, "analytics_workers", cfg.service.analytics_workers);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
  require(cfg.refine.max_edit_attempts >= 1, "refine.max_edit_attempts must be >= 1");
  require(cfg.analytics.k_min >= 2 && cfg.analytics.k_max >= cfg.analytics.k_min,
          "analytics k range must satisfy 2 <= k_min <= k_max");
  require(cfg.analytics.seeds_per_k >= 1, "analytics.seeds_per_k must be >= 1");
  return cfg;
}

AppConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot read config file " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kInvalidConfig, "config file is not a JSON object: " + path.string());
  }
  return config_from_json(doc);
}

void apply_env_overrides(AppConfig& cfg) {
  if (const char* v = env("CHART_REFINERY_DERENDER_URL")) {
    cfg.derender.endpoint_url = v;
    cfg.derender.kind = BackendKind::kHttp;
  }
  if (const char* v = env("CHART_REFINERY_LLM_URL")) {
    cfg.llm.endpoint_url = v;
    cfg.llm.kind = BackendKind::kHttp;
  }
  if (const char* v = env("CHART_REFINERY_EMBEDDING_URL")) {
    cfg.embedding.endpoint_url = v;
    cfg.embedding.kind = BackendKind::kHttp;
  }
  if (const char* v = env("CHART_REFINERY_INTERPRETER")) cfg.sandbox.interpreter_path = v;
  if (const char* v = env("CHART_REFINERY_STORE")) cfg.store_root = v;
}

AppConfig resolve_config(const std::optional<fs::path>& explicit_path) {
  AppConfig cfg;
  if (explicit_path) {
    cfg = load_config_file(*explicit_path);
  } else if (const char* v = env("CHART_REFINERY_CONFIG")) {
    cfg = load_config_file(v);
  }
  apply_env_overrides(cfg);
  return cfg;
}

}  // namespace chart_refinery
