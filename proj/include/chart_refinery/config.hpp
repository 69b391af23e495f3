#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "chart_refinery/session/image.hpp"

namespace chart_refinery {

enum class BackendKind { kMock, kHttp };
enum class BackendStyle { kOllama, kOpenAiChat };
enum class CaptureFormat { kPng, kSvg };

// Default instruction sent with the chart image to the chart-to-code model.
inline constexpr const char* kDefaultDerenderInstruction =
    "Convert this chart image into a complete, executable Python script that "
    "reproduces it with Matplotlib. Return only the code in a single "
    "```python fenced block.";

struct DerenderBackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::string endpoint_url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model_name = "chartcoder";
  double timeout_s = 120.0;
  int max_retries = 2;
  int backoff_base_ms = 500;
  std::string instruction = kDefaultDerenderInstruction;
  // Mock only: directory holding index.json (image sha256 -> script file).
  std::filesystem::path fixtures_dir;

  void validate() const;
};

struct LlmBackendConfig {
  BackendKind kind = BackendKind::kMock;
  BackendStyle style = BackendStyle::kOllama;
  std::string endpoint_url = "http://127.0.0.1:11434/api/generate";
  std::string model_name = "gpt-oss:20b";
  double temperature = 0.2;
  double timeout_s = 180.0;
  int max_retries = 2;
  int backoff_base_ms = 500;
  std::size_t max_prompt_chars = 32 * 1024;
  std::optional<std::string> api_key_env;

  void validate() const;
};

struct EmbeddingConfig {
  BackendKind kind = BackendKind::kMock;
  std::string endpoint_url = "https://api.openai.com/v1/embeddings";
  std::string model_name = "text-embedding-3-small";
  std::size_t dims = 1536;
  std::size_t batch_size = 128;
  std::size_t parallelism = 4;
  double timeout_s = 60.0;
  int max_retries = 2;
  int backoff_base_ms = 500;
  std::optional<std::string> api_key_env = std::string("OPENAI_API_KEY");

  void validate() const;
};

struct SandboxConfig {
  std::filesystem::path interpreter_path = "/usr/bin/python3";
  double timeout_s = 20.0;
  std::size_t max_output_bytes = 20u * 1024u * 1024u;
  std::filesystem::path workdir_root = std::filesystem::temp_directory_path();
  bool allow_network = false;
  CaptureFormat capture_format = CaptureFormat::kPng;
  std::size_t pool_size = 4;

  void validate() const;
};

struct RefineConfig {
  int max_edit_attempts = 3;
};

struct AnalyticsConfig {
  int k_min = 2;
  int k_max = 20;
  int seeds_per_k = 5;
  bool normalize_cosine = false;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_origin = "http://localhost:5173";
  std::optional<std::filesystem::path> ui_dir;
  std::size_t analytics_workers = 1;
};

struct AppConfig {
  std::filesystem::path store_root = "refinery-data";
  std::size_t image_size_cap = kDefaultImageSizeCap;
  DerenderBackendConfig derender;
  LlmBackendConfig llm;
  EmbeddingConfig embedding;
  SandboxConfig sandbox;
  RefineConfig refine;
  AnalyticsConfig analytics;
  ServiceConfig service;

  // Snapshot recorded on each session: endpoints and models, no secrets.
  nlohmann::json backend_snapshot() const;
};

// Builds a config from a JSON document; absent keys keep their defaults.
AppConfig config_from_json(const nlohmann::json& doc);
// Reads a JSON config file. Throws InvalidConfig.
AppConfig load_config_file(const std::filesystem::path& path);
// Applies CHART_REFINERY_* environment overrides in place.
void apply_env_overrides(AppConfig& cfg);
// Resolution order: explicit path, then $CHART_REFINERY_CONFIG, then defaults;
// env overrides applied last.
AppConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path);

}  // namespace chart_refinery
