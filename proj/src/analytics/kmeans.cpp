#include "chart_refinery/analytics/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "chart_refinery/error.hpp"

namespace chart_refinery::analytics {
namespace {

// Squared distance of every row to every centroid (N x k).
Matrix squared_distances(const Matrix& data, const Eigen::VectorXd& row_norms,
                         const Matrix& centroids) {
  Eigen::RowVectorXd c_norms = centroids.rowwise().squaredNorm().transpose();
  Matrix d = -2.0 * (data * centroids.transpose());
  d.colwise() += row_norms;
  d.rowwise() += c_norms;
  return d.cwiseMax(0.0);
}

// Draws one index with probability proportional to `weights`, skipping
// zero-weight rows.
Eigen::Index sample_weighted(const Eigen::VectorXd& weights, double total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double target = unit(rng) * total;
  Eigen::Index chosen = weights.size() - 1;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) {
      chosen = i;
      break;
    }
  }
  while (weights[chosen] == 0.0 && chosen > 0) --chosen;
  return chosen;
}

// Greedy k-means++: each step draws 2 + floor(ln k) candidates by D^2
// sampling and keeps the one that lowers the total potential most.
Matrix init_plus_plus(const Matrix& data, int k, std::mt19937_64& rng) {
  const auto n = data.rows();
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  Matrix centroids(k, data.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = data.row(pick(rng));
  Eigen::VectorXd closest = (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = closest.sum();
    if (total <= 0.0) {
      centroids.row(c) = data.row(pick(rng));
      continue;
    }
    Eigen::Index best = -1;
    double best_potential = 0.0;
    Eigen::VectorXd best_closest;
    for (int t = 0; t < trials; ++t) {
      const Eigen::Index cand = sample_weighted(closest, total, rng);
      Eigen::VectorXd next = closest.cwiseMin((data.rowwise() - data.row(cand)).rowwise().squaredNorm());
      const double potential = next.sum();
      if (best < 0 || potential < best_potential) {
        best = cand;
        best_potential = potential;
        best_closest = std::move(next);
      }
    }
    centroids.row(c) = data.row(best);
    closest = std::move(best_closest);
  }
  return centroids;
}

// Nearest-centroid assignment; ties go to the lower cluster index.
void assign(const Matrix& dist, std::vector<int>& assignments) {
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    Eigen::Index best = 0;
    dist.row(i).minCoeff(&best);
    assignments[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
}

// Gives each empty cluster the point farthest from its own centroid, taken
// from a cluster that can spare it. Returns true if anything moved.
bool repair_empty(const Matrix& data, Matrix& centroids, std::vector<int>& assignments) {
  const int k = static_cast<int>(centroids.rows());
  std::vector<int> sizes(k, 0);
  for (int a : assignments) ++sizes[a];
  bool moved = false;
  for (int c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const int a = assignments[static_cast<std::size_t>(i)];
      if (sizes[a] <= 1) continue;
      const double d = (data.row(i) - centroids.row(a)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far < 0) break;  // cannot happen while N >= k
    --sizes[assignments[static_cast<std::size_t>(far)]];
    assignments[static_cast<std::size_t>(far)] = c;
    sizes[c] = 1;
    centroids.row(c) = data.row(far);
    moved = true;
  }
  return moved;
}

Matrix means(const Matrix& data, const std::vector<int>& assignments, const Matrix& previous) {
  Matrix sums = Matrix::Zero(previous.rows(), previous.cols());
  std::vector<int> counts(static_cast<std::size_t>(previous.rows()), 0);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const int a = assignments[static_cast<std::size_t>(i)];
    sums.row(a) += data.row(i);
    ++counts[static_cast<std::size_t>(a)];
  }
  for (Eigen::Index c = 0; c < sums.rows(); ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) {
      sums.row(c) /= counts[static_cast<std::size_t>(c)];
    } else {
      sums.row(c) = previous.row(c);
    }
  }
  return sums;
}

}  // namespace

std::vector<int> ClusteringResult::cluster_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
  return sizes;
}

Eigen::RowVectorXd centroid_of(const Matrix& data) {
  if (data.rows() == 0) throw Error(ErrorCode::kTooFewRows, "centroid of an empty matrix");
  return data.colwise().mean();
}

double inertia_of(const Matrix& data, const std::vector<int>& assignments,
                  const Matrix& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    total += (data.row(i) - centroids.row(assignments[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return total;
}

ClusteringResult kmeans(const Matrix& data, int k, std::uint64_t seed, KMeansOptions options) {
  if (k < 2) throw Error(ErrorCode::kPreconditionViolated, "kmeans requires k >= 2");
  if (data.rows() < k) {
    throw Error(ErrorCode::kTooFewRows, "kmeans: " + std::to_string(data.rows()) +
                                            " rows is fewer than k = " + std::to_string(k),
                {{"rows", data.rows()}, {"k", k}});
  }
  std::mt19937_64 rng(seed);
  ClusteringResult result;
  result.k = k;
  result.seed = seed;
  result.assignments.assign(static_cast<std::size_t>(data.rows()), 0);
  const Eigen::VectorXd row_norms = data.rowwise().squaredNorm();

  Matrix centroids = init_plus_plus(data, k, rng);
  for (int it = 0; it < options.max_iters; ++it) {
    assign(squared_distances(data, row_norms, centroids), result.assignments);
    repair_empty(data, centroids, result.assignments);
    Matrix updated = means(data, result.assignments, centroids);
    const double shift = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    result.iterations = it + 1;
    result.inertia_history.push_back(inertia_of(data, result.assignments, centroids));
    if (shift < options.tol) break;
  }
  // Final labels against the final centroids, keeping clusters non-empty.
  std::vector<int> final_assign(result.assignments.size());
  assign(squared_distances(data, row_norms, centroids), final_assign);
  repair_empty(data, centroids, final_assign);
  if (final_assign != result.assignments) {
    result.assignments = std::move(final_assign);
    centroids = means(data, result.assignments, centroids);
    result.inertia_history.push_back(inertia_of(data, result.assignments, centroids));
  }
  result.centroids = std::move(centroids);
  result.inertia = inertia_of(data, result.assignments, result.centroids);
  return result;
}

}  // namespace chart_refinery::analytics
