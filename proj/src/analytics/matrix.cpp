#include "chart_refinery/analytics/matrix.hpp"

#include <cmath>
#include <unordered_set>

#include "chart_refinery/error.hpp"

namespace chart_refinery::analytics {

void EmbeddingMatrix::validate() const {
  if (values.rows() == 0) throw Error(ErrorCode::kInvalidInput, "embedding matrix has no rows");
  if (ids.size() != rows()) {
    throw Error(ErrorCode::kInvalidInput, "embedding matrix has " + std::to_string(rows()) +
                                              " rows but " + std::to_string(ids.size()) + " ids");
  }
  if (!values.allFinite()) throw Error(ErrorCode::kInvalidInput, "embedding matrix has non-finite entries");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw Error(ErrorCode::kInvalidInput, "duplicate row id " + id);
  }
}

void normalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0) m.row(i) /= n;
  }
}

}  // namespace chart_refinery::analytics
