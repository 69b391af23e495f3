#include <cmath>

#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/backend/mock.hpp"
#include "chart_refinery/error.hpp"

namespace chart_refinery {
using nlohmann::json;

namespace {

std::string content_string(const json& resp, const char* what) {
  try {
    return resp.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kBackendFailure,
                std::string(what) + " response lacks choices[0].message.content",
                {{"body", resp.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace).substr(0, 512)}});
  }
}

const std::string* opt_ptr(const std::optional<std::string>& v) { return v ? &*v : nullptr; }

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back(kAlphabet[n & 63]);
  }
  if (i + 1 == bytes.size()) {
    std::uint32_t n = bytes[i] << 16;
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out += "==";
  } else if (i + 2 == bytes.size()) {
    std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

json openai_vision_request(const std::string& model, const std::string& instruction,
                           const ChartImage& image) {
  std::string data_url = "data:" + std::string(mime_type(image.format)) + ";base64," +
                         base64_encode(image.bytes);
  return {{"model", model},
          {"messages",
           json::array({{{"role", "user"},
                         {"content",
                          json::array({{{"type", "text"}, {"text", instruction}},
                                       {{"type", "image_url"},
                                        {"image_url", {{"url", data_url}}}}})}}})},
          {"stream", false}};
}

json ollama_generate_request(const std::string& model, const std::string& prompt,
                             double temperature) {
  return {{"model", model},
          {"prompt", prompt},
          {"stream", false},
          {"options", {{"temperature", temperature}}}};
}

json openai_chat_request(const std::string& model, const std::string& prompt,
                         double temperature) {
  return {{"model", model},
          {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", temperature},
          {"stream", false}};
}

json embedding_request(const std::string& model, std::span<const std::string> texts) {
  return {{"model", model}, {"input", json(std::vector<std::string>(texts.begin(), texts.end()))}};
}

HttpChartToCodeBackend::HttpChartToCodeBackend(const DerenderBackendConfig& cfg)
    : cfg_(cfg), client_(cfg.endpoint_url, cfg.timeout_s) {}

std::string HttpChartToCodeBackend::complete(const std::string& instruction,
                                             const ChartImage& image) {
  return content_string(client_.post(openai_vision_request(cfg_.model_name, instruction, image)),
                        "chart-to-code");
}

HttpTextCompletionBackend::HttpTextCompletionBackend(const LlmBackendConfig& cfg)
    : cfg_(cfg),
      client_(cfg.endpoint_url, cfg.timeout_s, auth_headers_from_env(opt_ptr(cfg.api_key_env))) {}

std::string HttpTextCompletionBackend::complete(const std::string& prompt) {
  if (cfg_.style == BackendStyle::kOpenAiChat) {
    return content_string(
        client_.post(openai_chat_request(cfg_.model_name, prompt, cfg_.temperature)), "chat");
  }
  json resp = client_.post(ollama_generate_request(cfg_.model_name, prompt, cfg_.temperature));
  if (!resp.contains("response") || !resp.at("response").is_string()) {
    throw Error(ErrorCode::kBackendFailure, "ollama response lacks string field \"response\"",
                {{"body", resp.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace).substr(0, 512)}});
  }
  return resp.at("response").get<std::string>();
}

HttpEmbeddingBackend::HttpEmbeddingBackend(const EmbeddingConfig& cfg)
    : cfg_(cfg),
      client_(cfg.endpoint_url, cfg.timeout_s, auth_headers_from_env(opt_ptr(cfg.api_key_env))) {}

std::vector<std::vector<float>> HttpEmbeddingBackend::embed(std::span<const std::string> texts) {
  json resp = client_.post(embedding_request(cfg_.model_name, texts));
  std::vector<std::vector<float>> out;
  try {
    const auto& data = resp.at("data");
    if (data.size() != texts.size()) {
      throw Error(ErrorCode::kBackendFailure,
                  "embedding backend returned " + std::to_string(data.size()) +
                      " vectors for " + std::to_string(texts.size()) + " texts");
    }
    out.reserve(data.size());
    for (const auto& item : data) out.push_back(item.at("embedding").get<std::vector<float>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendFailure, std::string("malformed embedding response: ") + e.what());
  }
  return out;
}

Backends make_backends(const AppConfig& cfg) {
  Backends b;
  if (cfg.derender.kind == BackendKind::kHttp) {
    b.chart_to_code = std::make_shared<HttpChartToCodeBackend>(cfg.derender);
  } else {
    b.chart_to_code = std::make_shared<MockChartCoder>(cfg.derender.fixtures_dir);
  }
  if (cfg.llm.kind == BackendKind::kHttp) {
    b.llm = std::make_shared<HttpTextCompletionBackend>(cfg.llm);
  } else {
    b.llm = std::make_shared<MockCritic>();
  }
  if (cfg.embedding.kind == BackendKind::kHttp) {
    b.embedding = std::make_shared<HttpEmbeddingBackend>(cfg.embedding);
  } else {
    b.embedding = std::make_shared<MockEmbedder>(cfg.embedding.dims);
  }
  return b;
}

}  // namespace chart_refinery
