#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "chart_refinery/analytics/matrix.hpp"

namespace chart_refinery::analytics {

struct ClusteringResult {
  int k = 0;
  std::vector<int> assignments;  // row -> cluster
  Matrix centroids;              // k x D, means of their members
  double db_score = std::numeric_limits<double>::quiet_NaN();
  double inertia = 0.0;          // sum of squared distances to centroids
  std::uint64_t seed = 0;
  int iterations = 0;
  std::vector<double> inertia_history;  // after every centroid update

  std::vector<int> cluster_sizes() const;
};

struct KMeansOptions {
  int max_iters = 300;
  double tol = 1e-6;
};

// Lloyd's algorithm from a greedy k-means++ start seeded by `seed`. Empty clusters
// are repaired by moving in the point farthest from its centroid. Every
// returned cluster is non-empty. db_score is left NaN; see davies_bouldin.
// Throws TooFewRows when N < k, PreconditionViolated when k < 2.
ClusteringResult kmeans(const Matrix& data, int k, std::uint64_t seed,
                        KMeansOptions options = {});

// Coordinate-wise mean: the k = 1 degenerate case.
Eigen::RowVectorXd centroid_of(const Matrix& data);

// Sum of squared Euclidean distances from each row to its centroid.
double inertia_of(const Matrix& data, const std::vector<int>& assignments,
                  const Matrix& centroids);

}  // namespace chart_refinery::analytics
