#pragma once

#include <string>
#include <vector>

#include "chart_refinery/analytics/matrix.hpp"
#include "chart_refinery/backend/backends.hpp"
#include "chart_refinery/config.hpp"

namespace chart_refinery::analytics {

// One row per text, in order, fetched in batches of cfg.batch_size with at
// most cfg.parallelism requests in flight. Throws DimensionMismatch when a
// returned vector's length differs from cfg.dims.
EmbeddingMatrix embed_corpus(const std::vector<std::string>& ids,
                             const std::vector<std::string>& texts, const EmbeddingConfig& cfg,
                             EmbeddingBackend& backend);

}  // namespace chart_refinery::analytics
