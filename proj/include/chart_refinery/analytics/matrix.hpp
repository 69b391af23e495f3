#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace chart_refinery::analytics {

// Row-major so each observation is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EmbeddingMatrix {
  std::vector<std::string> ids;  // one per row, unique
  Matrix values;                 // N x D

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(values.cols()); }
  // Throws InvalidInput on non-finite entries, duplicate ids, N = 0 or an
  // id count that differs from the row count.
  void validate() const;
};

// Scales every row to unit L2 norm (zero rows stay zero).
void normalize_rows(Matrix& m);

}  // namespace chart_refinery::analytics
