#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <thread>

#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/backend/http_client.hpp"
#include "chart_refinery/backend/mock.hpp"
#include "chart_refinery/backend/retry.hpp"
#include "expect_error.hpp"
#include "test_support.hpp"

// After Eigen: resolv.h defines a _res macro that collides with Eigen internals.
#include <httplib.h>

using namespace chart_refinery;
using nlohmann::json;
using testsupport::StubServer;

namespace {

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

void reply_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

LlmBackendConfig llm_at(const StubServer& s, BackendStyle style) {
  LlmBackendConfig cfg;
  cfg.kind = BackendKind::kHttp;
  cfg.style = style;
  cfg.endpoint_url = s.url(style == BackendStyle::kOllama ? "/api/generate" : "/v1/chat/completions");
  cfg.timeout_s = 5;
  cfg.api_key_env.reset();
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("backends");

TEST_CASE("base64: RFC 4648 test vectors") {
  CHECK(base64_encode(bytes_of("")) == "");
  CHECK(base64_encode(bytes_of("f")) == "Zg==");
  CHECK(base64_encode(bytes_of("fo")) == "Zm8=");
  CHECK(base64_encode(bytes_of("foo")) == "Zm9v");
  CHECK(base64_encode(bytes_of("foob")) == "Zm9vYg==");
  CHECK(base64_encode(bytes_of("fooba")) == "Zm9vYmE=");
  CHECK(base64_encode(bytes_of("foobar")) == "Zm9vYmFy");
}

TEST_CASE("endpoint parsing") {
  auto e = parse_endpoint("http://127.0.0.1:11434/api/generate");
  CHECK(e.scheme == "http");
  CHECK(e.host == "127.0.0.1");
  CHECK(e.port == 11434);
  CHECK(e.path == "/api/generate");
  auto h = parse_endpoint("https://api.example.com/v1/embeddings?x=1");
  CHECK(h.port == 443);
  CHECK(h.path == "/v1/embeddings?x=1");
  CHECK(error_code_of([] { parse_endpoint("127.0.0.1:80"); }) == ErrorCode::kInvalidConfig);
  CHECK(error_code_of([] { parse_endpoint("http://host:99999/"); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("wire: chart-to-code request carries the image as a data URL") {
  const auto png = testsupport::make_png(3, 2, 1);
  ChartImage img = make_chart_image("i", png);
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    reply_json(res, {{"choices", {{{"message", {{"content", "```python\nplt.plot([1])\n```"}}}}}}});
  });
  DerenderBackendConfig cfg;
  cfg.kind = BackendKind::kHttp;
  cfg.endpoint_url = server.url("/v1/chat/completions");
  cfg.model_name = "chartcoder-test";
  HttpChartToCodeBackend backend(cfg);
  CHECK(backend.complete("convert", img) == "```python\nplt.plot([1])\n```");

  json sent = json::parse(server.last_body());
  CHECK(sent.at("model") == "chartcoder-test");
  CHECK(sent.at("stream") == false);
  const auto& content = sent.at("messages").at(0).at("content");
  CHECK(sent.at("messages").at(0).at("role") == "user");
  CHECK(content.at(0) == json{{"type", "text"}, {"text", "convert"}});
  CHECK(content.at(1).at("type") == "image_url");
  CHECK(content.at(1).at("image_url").at("url") == "data:image/png;base64," + base64_encode(png));
}

TEST_CASE("wire: ollama generate and openai chat styles") {
  StubServer server([](const httplib::Request& req, httplib::Response& res) {
    if (req.path == "/api/generate") {
      reply_json(res, {{"response", "# from ollama"}, {"done", true}});
    } else {
      reply_json(res, {{"choices", {{{"message", {{"role", "assistant"}, {"content", "# from chat"}}}}}}});
    }
  });
  HttpTextCompletionBackend ollama(llm_at(server, BackendStyle::kOllama));
  CHECK(ollama.complete("prompt text") == "# from ollama");
  json sent = json::parse(server.last_body());
  CHECK(sent == json{{"model", "gpt-oss:20b"},
                     {"prompt", "prompt text"},
                     {"stream", false},
                     {"options", {{"temperature", 0.2}}}});

  HttpTextCompletionBackend chat(llm_at(server, BackendStyle::kOpenAiChat));
  CHECK(chat.complete("p2") == "# from chat");
  sent = json::parse(server.last_body());
  CHECK(sent.at("messages") == json::array({{{"role", "user"}, {"content", "p2"}}}));
  CHECK(sent.at("temperature") == 0.2);
}

TEST_CASE("wire: embeddings request and response order") {
  StubServer server([](const httplib::Request& req, httplib::Response& res) {
    json in = json::parse(req.body);
    json data = json::array();
    for (std::size_t i = 0; i < in.at("input").size(); ++i) {
      data.push_back({{"index", i}, {"embedding", {double(i), 1.0, -1.0}}});
    }
    reply_json(res, {{"data", data}, {"model", in.at("model")}});
  });
  EmbeddingConfig cfg;
  cfg.kind = BackendKind::kHttp;
  cfg.endpoint_url = server.url("/v1/embeddings");
  cfg.api_key_env.reset();
  HttpEmbeddingBackend backend(cfg);
  std::vector<std::string> texts = {"a", "b", "c"};
  auto out = backend.embed(texts);
  REQUIRE(out.size() == 3);
  CHECK(out[2] == std::vector<float>{2.0f, 1.0f, -1.0f});
  json sent = json::parse(server.last_body());
  CHECK(sent == json{{"model", "text-embedding-3-small"}, {"input", {"a", "b", "c"}}});
}

TEST_CASE("malformed responses are BackendFailure") {
  StubServer server([](const httplib::Request& req, httplib::Response& res) {
    if (req.path == "/notjson") {
      res.set_content("<html>", "text/html");
    } else {
      reply_json(res, {{"unexpected", true}});
    }
  });
  auto cfg = llm_at(server, BackendStyle::kOllama);
  CHECK(error_code_of([&] { HttpTextCompletionBackend(cfg).complete("x"); }) == ErrorCode::kBackendFailure);
  cfg.style = BackendStyle::kOpenAiChat;
  CHECK(error_code_of([&] { HttpTextCompletionBackend(cfg).complete("x"); }) == ErrorCode::kBackendFailure);
  cfg.endpoint_url = server.url("/notjson");
  CHECK(error_code_of([&] { HttpTextCompletionBackend(cfg).complete("x"); }) == ErrorCode::kBackendFailure);
}

TEST_CASE("retry: 5xx is retried up to max_retries, 4xx never") {
  StubServer unavailable([](const httplib::Request&, httplib::Response& res) {
    reply_json(res, {{"error", "overloaded"}}, 503);
  });
  HttpTextCompletionBackend backend(llm_at(unavailable, BackendStyle::kOllama));
  RetryPolicy policy{2, 1, 2.0};
  int attempts = 0;
  auto e = error_of([&] { call_with_retries(policy, [&] { return backend.complete("x"); }, attempts); });
  CHECK(e.code() == ErrorCode::kBackendFailure);
  CHECK(e.retryable());
  CHECK(attempts == 3);
  CHECK(unavailable.hits() == 3);

  StubServer bad_request([](const httplib::Request&, httplib::Response& res) {
    reply_json(res, {{"error", "bad"}}, 400);
  });
  HttpTextCompletionBackend strict(llm_at(bad_request, BackendStyle::kOllama));
  e = error_of([&] { call_with_retries(policy, [&] { return strict.complete("x"); }, attempts); });
  CHECK_FALSE(e.retryable());
  CHECK(attempts == 1);
  CHECK(bad_request.hits() == 1);
}

TEST_CASE("retry: transient failures then success report n + 1 attempts") {
  StubServer flaky([n = std::make_shared<std::atomic<int>>(0)](const httplib::Request&, httplib::Response& res) {
    if ((*n)++ < 2) {
      reply_json(res, {{"error", "busy"}}, 502);
    } else {
      reply_json(res, {{"response", "# ok"}});
    }
  });
  HttpTextCompletionBackend backend(llm_at(flaky, BackendStyle::kOllama));
  int attempts = 0;
  CHECK(call_with_retries(RetryPolicy{3, 1, 2.0}, [&] { return backend.complete("x"); }, attempts) == "# ok");
  CHECK(attempts == 3);
}

TEST_CASE("retry: backoff doubles from the base") {
  RetryPolicy p{5, 500, 2.0};
  CHECK(p.delay_before(1).count() == 500);
  CHECK(p.delay_before(2).count() == 1000);
  CHECK(p.delay_before(3).count() == 2000);
}

TEST_CASE("transport: slow server is BackendTimeout, closed port is BackendUnreachable") {
  StubServer slow([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    reply_json(res, {{"response", "late"}});
  });
  auto cfg = llm_at(slow, BackendStyle::kOllama);
  cfg.timeout_s = 0.3;
  auto e = error_of([&] { HttpTextCompletionBackend(cfg).complete("x"); });
  CHECK(e.code() == ErrorCode::kBackendTimeout);
  CHECK(e.retryable());

  cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(testsupport::closed_port()) + "/api/generate";
  e = error_of([&] { HttpTextCompletionBackend(cfg).complete("x"); });
  CHECK(e.code() == ErrorCode::kBackendUnreachable);
  CHECK_FALSE(e.retryable());
}

TEST_CASE("mock chart coder: fixture lookup, generated fallback, fault injection") {
  MockChartCoder coder(testsupport::fixtures_dir() / "derender");
  ChartImage bar = make_chart_image("bar", testsupport::read_bytes(testsupport::bar_chart_png()));
  const std::string script = coder.complete("i", bar);
  CHECK(script.find(testsupport::read_text(testsupport::fixtures_dir() / "derender" / "bar_chart.py").substr(0, 40)) !=
        std::string::npos);

  ChartImage other = make_chart_image("o", testsupport::make_png(9, 9, 77));
  CHECK(coder.complete("i", other) == coder.complete("i", other));
  CHECK(coder.complete("i", other).find("plt.") != std::string::npos);

  coder.fail_next(2);
  CHECK(error_code_of([&] { coder.complete("i", other); }) == ErrorCode::kBackendTimeout);
  CHECK(error_code_of([&] { coder.complete("i", other); }) == ErrorCode::kBackendTimeout);
  CHECK_NOTHROW(coder.complete("i", other));
}

TEST_CASE("mock critic: deterministic critique, unreachable mode") {
  MockCritic a, b;
  const std::string prompt = "You are an expert in data visualization.\n\nimport matplotlib.pyplot as plt\nplt.plot(cmap='jet')\n";
  CHECK(a.complete(prompt) == b.complete(prompt));

  MockCriticOptions opts;
  opts.unreachable = true;
  MockCritic down(opts);
  CHECK(error_code_of([&] { down.complete(prompt); }) == ErrorCode::kBackendUnreachable);
}

TEST_CASE("property: mock embedder locality") {
  MockEmbedder emb(1536);
  std::mt19937 rng(99);
  auto word = [&] { return "w" + std::to_string(rng() % 100000); };
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 11);
    std::vector<std::string> base;
    std::set<std::string> seen;
    while (static_cast<int>(base.size()) < n) {
      auto w = word();
      if (seen.insert(w).second) base.push_back(w);
    }
    // Keep at least 60% of the tokens; swap the rest for fresh ones.
    const int keep = static_cast<int>(std::ceil(0.6 * n)) + static_cast<int>(rng() % (n - static_cast<int>(std::ceil(0.6 * n)) + 1));
    std::vector<std::string> other(base.begin(), base.begin() + keep);
    while (static_cast<int>(other.size()) < n) {
      auto w = word();
      if (seen.insert(w).second) other.push_back(w);
    }
    std::string ta, tb;
    for (auto& w : base) ta += w + " ";
    for (auto& w : other) tb += w + " ";
    REQUIRE(token_overlap(ta, tb) >= 0.6);
    const double c = cosine(emb.embed_one(ta), emb.embed_one(tb));
    CHECK(c >= 0.8);
  }
  // Disjoint texts sit well below the locality threshold.
  const double far = cosine(emb.embed_one("alpha beta gamma"), emb.embed_one("delta epsilon zeta"));
  CHECK(far < 0.7);
  auto v = emb.embed_one("unit norm check");
  double norm = 0;
  for (float x : v) norm += double(x) * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("make_backends: mocks by default, http when configured") {
  AppConfig cfg;
  auto b = make_backends(cfg);
  CHECK(dynamic_cast<MockChartCoder*>(b.chart_to_code.get()) != nullptr);
  CHECK(dynamic_cast<MockCritic*>(b.llm.get()) != nullptr);
  CHECK(dynamic_cast<MockEmbedder*>(b.embedding.get()) != nullptr);
  cfg.llm.kind = BackendKind::kHttp;
  b = make_backends(cfg);
  CHECK(dynamic_cast<HttpTextCompletionBackend*>(b.llm.get()) != nullptr);
}

TEST_SUITE_END();
