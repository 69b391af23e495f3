#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "chart_refinery/analytics/kmeans.hpp"

namespace chart_refinery::analytics {

struct KScore {
  int k = 0;
  std::optional<double> db_score;  // nullopt when every seed was degenerate
  std::uint64_t seed = 0;
  double inertia = 0.0;
};

struct SelectKOptions {
  int k_min = 2;
  int k_max = 20;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  KMeansOptions kmeans;
  std::size_t threads = 0;  // 0 = hardware concurrency
  // Called with completed/total after each (k, seed) job.
  std::function<void(std::size_t, std::size_t)> progress;
};

struct SelectKResult {
  ClusteringResult best;  // db_score filled
  std::vector<KScore> curve;
};

std::vector<std::uint64_t> seed_list(int count, std::uint64_t base = 0);

// Sweeps k over [k_min, k_max] and seeds; per k keeps the seed with the
// lowest Davies-Bouldin index, then returns the global minimum. Ties go to
// the smaller k, then the smaller seed. Deterministic for a given input
// regardless of thread count.
// Throws TooFewRows when N < k_max, UnclusterableCorpus when every k is
// degenerate.
SelectKResult select_k(const Matrix& data, const SelectKOptions& options);

}  // namespace chart_refinery::analytics
