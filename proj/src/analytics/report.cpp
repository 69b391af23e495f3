#include "chart_refinery/analytics/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "chart_refinery/error.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery::analytics {

std::string ClusterSummary::label() const {
  std::string out;
  for (const auto& t : top_terms) {
    if (!out.empty()) out += " / ";
    out += t;
  }
  return out;
}

std::vector<std::string> top_terms(const std::vector<std::string>& texts, std::size_t n) {
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts) {
    for (auto& tok : content_tokens(t)) {
      // Bare numbers make poor labels.
      if (std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
      ++freq[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.push_back(ranked[i].first);
  return out;
}

ClusterReport build_cluster_report(const Matrix& data, const ClusteringResult& clustering,
                                   const std::vector<std::string>& texts,
                                   const std::vector<KScore>& db_curve) {
  if (texts.size() != static_cast<std::size_t>(data.rows()) ||
      clustering.assignments.size() != texts.size()) {
    throw Error(ErrorCode::kPreconditionViolated, "clustering, texts and matrix disagree in size");
  }
  ClusterReport report;
  report.selected_k = clustering.k;
  report.db_score = clustering.db_score;
  report.db_curve = db_curve;

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(clustering.k));
  for (std::size_t i = 0; i < clustering.assignments.size(); ++i) {
    members[static_cast<std::size_t>(clustering.assignments[i])].push_back(i);
  }
  for (int c = 0; c < clustering.k; ++c) {
    const auto& rows = members[static_cast<std::size_t>(c)];
    ClusterSummary summary;
    summary.index = c;
    summary.size = rows.size();
    std::vector<std::string> cluster_texts;
    for (auto r : rows) cluster_texts.push_back(texts[r]);
    summary.top_terms = top_terms(cluster_texts, kTopTerms);

    if (!rows.empty()) {
      Matrix sub(static_cast<Eigen::Index>(rows.size()), data.cols());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        sub.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
      }
      // Pairwise distances through the Gram matrix.
      Eigen::MatrixXd gram = sub * sub.transpose();
      Eigen::VectorXd sq = gram.diagonal();
      std::vector<double> total(rows.size(), 0.0);
      for (Eigen::Index i = 0; i < gram.rows(); ++i) {
        for (Eigen::Index j = 0; j < gram.cols(); ++j) {
          if (i == j) continue;
          total[static_cast<std::size_t>(i)] += std::sqrt(std::max(0.0, sq[i] + sq[j] - 2.0 * gram(i, j)));
        }
      }
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return total[a] < total[b]; });
      for (std::size_t i = 0; i < order.size() && i < kMedoidExamples; ++i) {
        summary.medoid_rows.push_back(rows[order[i]]);
        summary.medoid_texts.push_back(texts[rows[order[i]]]);
      }
    }
    report.clusters.push_back(std::move(summary));
  }
  return report;
}

}  // namespace chart_refinery::analytics
