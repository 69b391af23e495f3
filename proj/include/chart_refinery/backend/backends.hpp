#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chart_refinery/backend/http_client.hpp"
#include "chart_refinery/config.hpp"
#include "chart_refinery/session/image.hpp"

namespace chart_refinery {

// Chart image -> completion text (expected to contain plotting code).
// Implementations make exactly one attempt per call.
class ChartToCodeBackend {
 public:
  virtual ~ChartToCodeBackend() = default;
  virtual std::string complete(const std::string& instruction, const ChartImage& image) = 0;
};

// Prompt -> completion text.
class TextCompletionBackend {
 public:
  virtual ~TextCompletionBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Texts -> one vector per text, in order.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);

// Request bodies, exposed for wire-format tests.
nlohmann::json openai_vision_request(const std::string& model, const std::string& instruction,
                                     const ChartImage& image);
nlohmann::json ollama_generate_request(const std::string& model, const std::string& prompt,
                                       double temperature);
nlohmann::json openai_chat_request(const std::string& model, const std::string& prompt,
                                   double temperature);
nlohmann::json embedding_request(const std::string& model, std::span<const std::string> texts);

// OpenAI-style chat completion with the image as a base64 data URL.
class HttpChartToCodeBackend final : public ChartToCodeBackend {
 public:
  explicit HttpChartToCodeBackend(const DerenderBackendConfig& cfg);
  std::string complete(const std::string& instruction, const ChartImage& image) override;

 private:
  DerenderBackendConfig cfg_;
  HttpJsonClient client_;
};

// Ollama /api/generate or OpenAI-style chat, per cfg.style.
class HttpTextCompletionBackend final : public TextCompletionBackend {
 public:
  explicit HttpTextCompletionBackend(const LlmBackendConfig& cfg);
  std::string complete(const std::string& prompt) override;

 private:
  LlmBackendConfig cfg_;
  HttpJsonClient client_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(const EmbeddingConfig& cfg);
  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;

 private:
  EmbeddingConfig cfg_;
  HttpJsonClient client_;
};

struct Backends {
  std::shared_ptr<ChartToCodeBackend> chart_to_code;
  std::shared_ptr<TextCompletionBackend> llm;
  std::shared_ptr<EmbeddingBackend> embedding;
};

// HTTP or in-repo mock per each section's `backend` setting.
Backends make_backends(const AppConfig& cfg);

}  // namespace chart_refinery
