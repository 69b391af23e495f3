#include "chart_refinery/analytics/projection.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>

#include "chart_refinery/error.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery::analytics {

Projection2D project_pca(const EmbeddingMatrix& matrix) {
  matrix.validate();
  const auto n = matrix.values.rows();
  const auto d = matrix.values.cols();
  if (n < 3) {
    throw Error(ErrorCode::kTooFewRows, "projection needs at least 3 rows",
                {{"rows", n}});
  }
  Matrix centered = matrix.values.rowwise() - matrix.values.colwise().mean();

  // Principal axes (D x 2), from whichever of X'X and XX' is smaller.
  Eigen::MatrixXd axes(d, 2);
  if (d <= n) {
    Eigen::MatrixXd cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    axes.col(0) = eig.eigenvectors().col(d - 1);
    axes.col(1) = d >= 2 ? Eigen::VectorXd(eig.eigenvectors().col(d - 2))
                         : Eigen::VectorXd::Zero(d);
  } else {
    Eigen::MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd v = centered.transpose() * eig.eigenvectors().col(n - 1 - c);
      const double norm = v.norm();
      axes.col(c) = norm > 0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Zero(d);
    }
  }
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    axes.col(c).cwiseAbs().maxCoeff(&arg);
    if (axes(arg, c) < 0) axes.col(c) = -axes.col(c);
  }

  Projection2D out;
  out.ids = matrix.ids;
  out.coords = centered * axes;
  out.method = ProjectionMethod::kPca;
  return out;
}

Projection2D attach_external(const EmbeddingMatrix& matrix, const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot read projection file " + csv.string());
  std::vector<std::string> ids;
  std::vector<std::pair<double, double>> xy;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::string_view row = trim(line);
    if (row.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss{std::string(row)};
    for (std::string cell; std::getline(ss, cell, ',');) cols.emplace_back(trim(cell));
    if (first && cols.size() >= 2 && (cols[cols.size() - 1] == "y" || cols[0] == "id")) {
      first = false;
      continue;  // header
    }
    first = false;
    try {
      if (cols.size() == 3) {
        ids.push_back(cols[0]);
        xy.emplace_back(std::stod(cols[1]), std::stod(cols[2]));
      } else if (cols.size() == 2) {
        xy.emplace_back(std::stod(cols[0]), std::stod(cols[1]));
      } else {
        throw Error(ErrorCode::kInvalidInput, "projection row must be id,x,y or x,y: " + line);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidInput, "non-numeric projection row: " + line);
    }
  }
  if (xy.size() != matrix.rows()) {
    throw Error(ErrorCode::kInvalidInput,
                "projection has " + std::to_string(xy.size()) + " rows, matrix has " +
                    std::to_string(matrix.rows()),
                {{"expected_rows", matrix.rows()}, {"actual_rows", xy.size()}});
  }
  if (!ids.empty() && ids != matrix.ids) {
    throw Error(ErrorCode::kInvalidInput, "projection row ids do not match the matrix order");
  }
  Projection2D out;
  out.ids = matrix.ids;
  out.coords.resize(static_cast<Eigen::Index>(xy.size()), 2);
  for (std::size_t i = 0; i < xy.size(); ++i) {
    out.coords(static_cast<Eigen::Index>(i), 0) = xy[i].first;
    out.coords(static_cast<Eigen::Index>(i), 1) = xy[i].second;
  }
  if (!out.coords.allFinite()) throw Error(ErrorCode::kInvalidInput, "projection has non-finite coordinates");
  out.method = ProjectionMethod::kExternal;
  return out;
}

}  // namespace chart_refinery::analytics
