#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chart_refinery/analytics/matrix.hpp"

namespace chart_refinery::analytics {

enum class ProjectionMethod { kPca, kExternal };

struct Projection2D {
  std::vector<std::string> ids;
  Matrix coords;  // N x 2
  ProjectionMethod method = ProjectionMethod::kPca;
};

// Top-2 principal components of the centered matrix. Each component's sign
// is fixed so its largest-magnitude loading is positive.
// Throws TooFewRows when N < 3.
Projection2D project_pca(const EmbeddingMatrix& matrix);

// Attaches precomputed coordinates (e.g. from an external UMAP run). The
// CSV holds `id,x,y` rows, optional header; ids, when present, must match
// the matrix order. Throws InvalidInput on row-count or id mismatch.
Projection2D attach_external(const EmbeddingMatrix& matrix, const std::filesystem::path& csv);

}  // namespace chart_refinery::analytics
