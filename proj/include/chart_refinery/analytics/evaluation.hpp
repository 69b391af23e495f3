#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chart_refinery/analytics/projection.hpp"
#include "chart_refinery/analytics/report.hpp"
#include "chart_refinery/analytics/select_k.hpp"
#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/config.hpp"

namespace chart_refinery::analytics {

struct EvalCorpus {
  std::vector<std::string> ids;
  std::vector<std::string> texts;
};

struct EvalOptions {
  int k_min = 2;
  int k_max = 20;
  int seeds = 5;
  bool normalize_cosine = false;
  std::size_t threads = 0;
  std::optional<std::filesystem::path> projection_file;  // EXTERNAL coordinates
  std::optional<std::filesystem::path> cache_dir;        // embedding cache
  // fraction in [0, 1] plus a short phase name
  std::function<void(double, const std::string&)> progress;

  static EvalOptions from_config(const AnalyticsConfig& cfg);
};

struct EvalResult {
  ClusteringResult best;
  ClusterReport report;
  Projection2D projection;
  std::string corpus_hash;
  bool embeddings_cached = false;
  std::filesystem::path out_dir;
};

// Key for the embedding cache: model, dimension and every text in order.
std::string corpus_hash(const EvalCorpus& corpus, const EmbeddingConfig& cfg);

// Validates the k range against the corpus size. Throws InvalidInput or
// TooFewRows.
void check_eval_request(std::size_t corpus_size, int k_min, int k_max, int seeds);

// Embeds (or loads cached embeddings), sweeps k, projects and writes
// embeddings.bin, clusters.json, projection.csv and report.md into out_dir.
EvalResult run_evaluation(const EvalCorpus& corpus, const EvalOptions& options,
                          const EmbeddingConfig& embed_cfg, EmbeddingBackend& backend,
                          const std::filesystem::path& out_dir);

// One recommendation per non-blank line.
EvalCorpus read_recs_file(const std::filesystem::path& path);

}  // namespace chart_refinery::analytics
