#include "chart_refinery/analytics/select_k.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <mutex>
#include <thread>

#include "chart_refinery/analytics/davies_bouldin.hpp"
#include "chart_refinery/error.hpp"

namespace chart_refinery::analytics {

std::vector<std::uint64_t> seed_list(int count, std::uint64_t base) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  return seeds;
}

SelectKResult select_k(const Matrix& data, const SelectKOptions& options) {
  if (options.k_min < 2 || options.k_max < options.k_min) {
    throw Error(ErrorCode::kInvalidInput, "k range must satisfy 2 <= k_min <= k_max");
  }
  if (options.seeds.empty()) throw Error(ErrorCode::kInvalidInput, "seed list is empty");
  if (data.rows() < options.k_max) {
    throw Error(ErrorCode::kTooFewRows,
                "corpus has " + std::to_string(data.rows()) + " rows, k_max is " +
                    std::to_string(options.k_max),
                {{"rows", data.rows()}, {"k_max", options.k_max}});
  }

  struct Job {
    int k;
    std::uint64_t seed;
    std::optional<ClusteringResult> result;  // nullopt when degenerate
  };
  std::vector<Job> jobs;
  for (int k = options.k_min; k <= options.k_max; ++k) {
    for (auto seed : options.seeds) jobs.push_back({k, seed, std::nullopt});
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;
  std::mutex error_mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        auto r = kmeans(data, jobs[i].k, jobs[i].seed, options.kmeans);
        try {
          r.db_score = davies_bouldin(data, r.assignments, r.centroids);
          jobs[i].result = std::move(r);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kDegenerateCentroids) throw;
        }
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!failure) failure = std::current_exception();
      }
      const std::size_t completed = ++done;
      if (options.progress) {
        std::lock_guard lock(progress_mu);
        options.progress(completed, jobs.size());
      }
    }
  };
  std::size_t threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  SelectKResult out;
  std::optional<std::size_t> global;
  for (int k = options.k_min; k <= options.k_max; ++k) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].k != k || !jobs[i].result) continue;
      // Jobs are ordered by seed-list position; strict < keeps the earlier seed on ties.
      if (!best || jobs[i].result->db_score < jobs[*best].result->db_score ||
          (jobs[i].result->db_score == jobs[*best].result->db_score &&
           jobs[i].seed < jobs[*best].seed)) {
        best = i;
      }
    }
    KScore score{k, std::nullopt, 0, 0.0};
    if (best) {
      const auto& r = *jobs[*best].result;
      score = {k, r.db_score, r.seed, r.inertia};
      if (!global || r.db_score < jobs[*global].result->db_score) global = best;
    }
    out.curve.push_back(score);
  }
  if (!global) {
    throw Error(ErrorCode::kUnclusterableCorpus,
                "every k in the sweep produced coincident centroids");
  }
  out.best = std::move(*jobs[*global].result);
  return out;
}

}  // namespace chart_refinery::analytics
