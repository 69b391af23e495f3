#include "chart_refinery/analytics/davies_bouldin.hpp"

#include <algorithm>
#include <cmath>

#include "chart_refinery/error.hpp"

namespace chart_refinery::analytics {

double davies_bouldin(const Matrix& data, const std::vector<int>& assignments,
                      const Matrix& centroids) {
  const auto k = centroids.rows();
  if (k < 2) throw Error(ErrorCode::kPreconditionViolated, "Davies-Bouldin requires k >= 2");
  if (assignments.size() != static_cast<std::size_t>(data.rows())) {
    throw Error(ErrorCode::kPreconditionViolated, "assignments do not cover every row");
  }
  std::vector<double> scatter(static_cast<std::size_t>(k), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const int a = assignments[static_cast<std::size_t>(i)];
    if (a < 0 || a >= k) throw Error(ErrorCode::kPreconditionViolated, "assignment out of range");
    scatter[static_cast<std::size_t>(a)] += (data.row(i) - centroids.row(a)).norm();
    ++counts[static_cast<std::size_t>(a)];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw Error(ErrorCode::kPreconditionViolated,
                  "cluster " + std::to_string(c) + " is empty");
    }
    scatter[static_cast<std::size_t>(c)] /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      const double separation = (centroids.row(i) - centroids.row(j)).norm();
      if (!(separation > 0.0)) {
        throw Error(ErrorCode::kDegenerateCentroids,
                    "centroids " + std::to_string(i) + " and " + std::to_string(j) + " coincide",
                    {{"i", i}, {"j", j}});
      }
      worst = std::max(worst, (scatter[static_cast<std::size_t>(i)] +
                               scatter[static_cast<std::size_t>(j)]) / separation);
    }
    total += worst;
  }
  return total / static_cast<double>(k);
}

}  // namespace chart_refinery::analytics
