#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "chart_refinery/analytics/matrix.hpp"
#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/backend/mock.hpp"
#include "chart_refinery/config.hpp"
#include "chart_refinery/session/clock.hpp"

namespace httplib {
class Server;
struct Request;
struct Response;
}  // namespace httplib

namespace testsupport {

namespace fs = std::filesystem;
using chart_refinery::analytics::Matrix;

fs::path fixtures_dir();
fs::path bar_chart_png();

std::vector<std::uint8_t> read_bytes(const fs::path& path);
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// mkdtemp-backed directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "crtest");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Minimal RGB PNG (zlib-compressed IDAT) with seed-dependent pixels.
std::vector<std::uint8_t> make_png(std::uint32_t width, std::uint32_t height, std::uint32_t seed = 0);
// Bytes with a JPEG SOF0 header declaring width x height.
std::vector<std::uint8_t> make_jpeg_header(std::uint16_t width, std::uint16_t height);

// Config rooted in `root`: mock backends, fixture chart scripts, fast
// backoff, sandbox workdirs under root/sandbox.
chart_refinery::AppConfig test_config(const fs::path& root);

struct Mocks {
  std::shared_ptr<chart_refinery::MockChartCoder> coder;
  std::shared_ptr<chart_refinery::MockCritic> critic;
  std::shared_ptr<chart_refinery::MockEmbedder> embedder;

  explicit Mocks(chart_refinery::MockCriticOptions critic_options = {}, std::size_t dims = 1536);
  chart_refinery::Backends backends() const;
};

// Blocks the first call until release(); later calls pass straight through.
class GatedCritic final : public chart_refinery::TextCompletionBackend {
 public:
  explicit GatedCritic(std::shared_ptr<chart_refinery::TextCompletionBackend> inner)
      : inner_(std::move(inner)) {}
  std::string complete(const std::string& prompt) override;
  void wait_entered();
  void release();

 private:
  std::shared_ptr<chart_refinery::TextCompletionBackend> inner_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool entered_ = false;
  bool released_ = false;
  std::atomic<int> calls_{0};
};

chart_refinery::Clock fixed_clock();

// Loopback HTTP server on a free port, serving in a background thread.
class StubServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  explicit StubServer(Handler handler);
  ~StubServer();
  int port() const { return port_; }
  std::string url(const std::string& path) const;
  int hits() const { return hits_.load(); }
  std::string last_body() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  mutable std::mutex mu_;
  std::string last_body_;
};

// A port on 127.0.0.1 with nothing listening.
int closed_port();

// Independent oracles ------------------------------------------------------

// Adjusted Rand index by direct pair counting (O(n^2)).
double pairwise_ari(const std::vector<int>& a, const std::vector<int>& b);

// Minimum within-cluster sum of squares over every 2-partition of the rows.
double brute_force_two_partition(const Matrix& data);

// Davies-Bouldin from the textbook definition, scalar loops only.
double scalar_davies_bouldin(const std::vector<std::vector<double>>& points,
                             const std::vector<int>& labels);

// Hand-labeled parser regression corpus (fixtures/critique/parser_corpus.json).
struct ParserCase {
  std::string name;
  std::string completion;
  std::vector<std::string> expected;
  std::vector<std::pair<int, std::string>> skipped;  // (line_no, reason)
};
std::vector<ParserCase> load_parser_corpus();

// Regex-based reference for the recommendation line grammar, written
// independently of the library parser.
struct ReferenceParse {
  std::vector<std::string> texts;
  std::vector<int> text_lines;
  std::vector<std::pair<int, std::string>> skipped;
  int total_lines = 0;
};
ReferenceParse reference_parse(const std::string& completion, std::size_t cap);

// Random completion text biased toward parser edge cases.
std::string random_completion(std::mt19937& rng);

}  // namespace testsupport
