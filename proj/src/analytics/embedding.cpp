#include "chart_refinery/analytics/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "chart_refinery/backend/retry.hpp"
#include "chart_refinery/error.hpp"

namespace chart_refinery::analytics {

EmbeddingMatrix embed_corpus(const std::vector<std::string>& ids,
                             const std::vector<std::string>& texts, const EmbeddingConfig& cfg,
                             EmbeddingBackend& backend) {
  if (texts.empty()) throw Error(ErrorCode::kInvalidInput, "nothing to embed");
  if (ids.size() != texts.size()) {
    throw Error(ErrorCode::kInvalidInput, "ids and texts differ in length");
  }
  cfg.validate();
  EmbeddingMatrix out;
  out.ids = ids;
  out.values.resize(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(cfg.dims));

  const std::size_t batches = (texts.size() + cfg.batch_size - 1) / cfg.batch_size;
  RetryPolicy policy{cfg.max_retries, cfg.backoff_base_ms};
  auto run_batch = [&](std::size_t b) {
    const std::size_t begin = b * cfg.batch_size;
    const std::size_t end = std::min(texts.size(), begin + cfg.batch_size);
    std::span<const std::string> chunk(texts.data() + begin, end - begin);
    int attempts = 0;
    auto vectors = call_with_retries(policy, [&] { return backend.embed(chunk); }, attempts);
    if (vectors.size() != chunk.size()) {
      throw Error(ErrorCode::kBackendFailure, "embedding backend returned a short batch");
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (vectors[i].size() != cfg.dims) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "embedding has " + std::to_string(vectors[i].size()) +
                        " dimensions, expected " + std::to_string(cfg.dims),
                    {{"expected", cfg.dims}, {"actual", vectors[i].size()}});
      }
      for (std::size_t d = 0; d < cfg.dims; ++d) {
        const double v = vectors[i][d];
        if (!std::isfinite(v)) throw Error(ErrorCode::kBackendFailure, "embedding has non-finite entries");
        out.values(static_cast<Eigen::Index>(begin + i), static_cast<Eigen::Index>(d)) = v;
      }
    }
  };
  // Waves of at most `parallelism` concurrent batches; rows are written to
  // disjoint slices so no locking is needed.
  for (std::size_t wave = 0; wave < batches; wave += cfg.parallelism) {
    std::vector<std::future<void>> inflight;
    for (std::size_t b = wave; b < std::min(batches, wave + cfg.parallelism); ++b) {
      inflight.push_back(std::async(std::launch::async, run_batch, b));
    }
    for (auto& f : inflight) f.wait();
    for (auto& f : inflight) f.get();
  }
  return out;
}

}  // namespace chart_refinery::analytics
