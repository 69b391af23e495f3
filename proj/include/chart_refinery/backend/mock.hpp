#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/error.hpp"

namespace chart_refinery {

// Deterministic stand-in for a chart-to-code model. Images listed in
// <fixtures_dir>/index.json map to canned scripts; any other image gets a
// script generated from its hash, so the same image always yields the same
// code.
class MockChartCoder final : public ChartToCodeBackend {
 public:
  explicit MockChartCoder(std::filesystem::path fixtures_dir = {});

  std::string complete(const std::string& instruction, const ChartImage& image) override;

  // Fault injection: the next `n` calls throw `code` (retryable by default).
  void fail_next(int n, ErrorCode code = ErrorCode::kBackendTimeout);
  // Return this raw completion text instead of a script.
  void override_completion(std::optional<std::string> text);
  int calls() const { return calls_.load(); }

 private:
  std::map<std::string, std::string> fixtures_;  // sha256 -> script
  std::mutex mu_;
  int pending_failures_ = 0;
  ErrorCode failure_code_ = ErrorCode::kBackendTimeout;
  std::optional<std::string> override_;
  std::atomic<int> calls_{0};
};

// Script the mock chart coder produces for an image hash with no fixture.
std::string generated_chart_script(const std::string& image_sha256);

// Rule table shared by the mock critic and its editor. Each rule detects one
// design issue in a plotting script and knows how to fix it.
struct MockDesignRule {
  std::string issue;  // recommendation text the critic emits
  bool (*detect)(const std::string& source);
  std::string (*fix)(const std::string& source);
};
const std::vector<MockDesignRule>& mock_design_rules();

struct MockCriticOptions {
  // Fixed text for every critique request instead of rule-based output.
  std::optional<std::string> critique_override;
  // Number of edit requests answered with a script that fails to run.
  int broken_edits = 0;
  bool always_broken_edits = false;
  // Every call throws BackendUnreachable.
  bool unreachable = false;
  // The next n calls throw BackendTimeout.
  int transient_failures = 0;
};

// Deterministic stand-in for the critique/edit LLM. Critique prompts get one
// `# issue` line per triggered rule; edit prompts get the base script with
// each selected issue's fix applied, in one fenced block.
class MockCritic final : public TextCompletionBackend {
 public:
  explicit MockCritic(MockCriticOptions options = {});

  std::string complete(const std::string& prompt) override;

  MockCriticOptions& options() { return options_; }
  int critique_calls() const { return critique_calls_.load(); }
  int edit_calls() const { return edit_calls_.load(); }
  std::vector<std::string> prompts() const;

 private:
  std::string critique(const std::string& prompt);
  std::string edit(const std::string& prompt);

  mutable std::mutex mu_;
  MockCriticOptions options_;
  std::vector<std::string> prompts_;
  std::atomic<int> critique_calls_{0};
  std::atomic<int> edit_calls_{0};
};

// Offline embedding model: unit vectors built from shared-token basis
// vectors plus a common offset, so texts with >= 60% token overlap land at
// cosine >= 0.8 and unrelated texts sit near cosine 0.55.
class MockEmbedder final : public EmbeddingBackend {
 public:
  explicit MockEmbedder(std::size_t dims = 1536) : dims_(dims) {}

  std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;
  std::vector<float> embed_one(const std::string& text) const;

  std::size_t dims() const { return dims_; }
  int calls() const { return calls_.load(); }

 private:
  std::size_t dims_;
  std::atomic<int> calls_{0};
};

// Token overlap used by the embedder's locality guarantee:
// |A ∩ B| / max(|A|, |B|) over distinct content tokens.
double token_overlap(const std::string& a, const std::string& b);

}  // namespace chart_refinery
