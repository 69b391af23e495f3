#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "chart_refinery/error.hpp"
#include "chart_refinery/pipeline.hpp"
#include "chart_refinery/session/store.hpp"

namespace httplib {
class Server;
}

namespace chart_refinery {

enum class ApiErrorCode { kInvalidInput, kNotFound, kConflict, kBackendFailure, kInternal };

std::string_view to_string(ApiErrorCode code);
ApiErrorCode api_error_code(ErrorCode code);
int http_status(ApiErrorCode code);

// {"code", "message", "detail"}; detail.error carries the library error name.
nlohmann::json api_error_body(const Error& error);

enum class RunState { kQueued, kRunning, kSucceeded, kFailed };
std::string_view to_string(RunState state);

struct AnalyticsRunRequest {
  std::optional<std::string> corpus_dir;
  std::vector<std::string> session_ids;
  int k_min = 2;
  int k_max = 20;
  int seeds = 5;
  bool normalize_cosine = false;
  std::optional<std::string> projection_file;

  // Throws InvalidInput on malformed bodies.
  static AnalyticsRunRequest from_json(const nlohmann::json& body, const AnalyticsConfig& defaults);
};

struct AnalyticsRun {
  std::string id;
  AnalyticsRunRequest request;
  RunState state = RunState::kQueued;
  double progress = 0.0;
  std::string phase = "queued";
  std::optional<nlohmann::json> report;
  std::optional<nlohmann::json> error;
  std::filesystem::path out_dir;

  nlohmann::json to_json() const;
};

// Background queue running evaluation jobs on a fixed number of workers.
class AnalyticsRunner {
 public:
  AnalyticsRunner(Pipeline& pipeline, std::size_t workers);
  ~AnalyticsRunner();

  // Validates what can be checked up front and queues the run.
  std::string submit(AnalyticsRunRequest request);
  std::optional<AnalyticsRun> get(const std::string& id) const;

 private:
  void worker_loop();
  void execute(const std::string& id);

  Pipeline& pipeline_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, AnalyticsRun> runs_;
  std::deque<std::string> queue_;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
  RandomIdSource ids_;
};

// HTTP facade over one Pipeline. Mutating session endpoints hold a
// per-session lease; a second concurrent request gets 409.
class Service {
 public:
  explicit Service(Pipeline& pipeline);
  ~Service();

  httplib::Server& server() { return *server_; }
  // Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  void listen_after_bind();
  void stop();

 private:
  void routes();

  Pipeline& pipeline_;
  LeaseTable leases_;
  AnalyticsRunner runner_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace chart_refinery
