#pragma once

#include <vector>

#include "chart_refinery/analytics/matrix.hpp"

namespace chart_refinery::analytics {

// DB = (1/k) sum_i max_{j != i} (S_i + S_j) / M_ij, with S_i the mean
// Euclidean distance of cluster i's members to centroid i and M_ij the
// distance between centroids i and j.
// Throws PreconditionViolated for k < 2 or an empty cluster, and
// DegenerateCentroids when two centroids coincide.
double davies_bouldin(const Matrix& data, const std::vector<int>& assignments,
                      const Matrix& centroids);

}  // namespace chart_refinery::analytics
