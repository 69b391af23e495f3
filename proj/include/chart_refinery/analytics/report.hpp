#pragma once

#include <string>
#include <vector>

#include "chart_refinery/analytics/kmeans.hpp"
#include "chart_refinery/analytics/select_k.hpp"

namespace chart_refinery::analytics {

inline constexpr std::size_t kTopTerms = 5;
inline constexpr std::size_t kMedoidExamples = 5;

struct ClusterSummary {
  int index = 0;
  std::size_t size = 0;
  std::vector<std::string> top_terms;
  // Members ordered by summed distance to co-members; the first is the medoid.
  std::vector<std::size_t> medoid_rows;
  std::vector<std::string> medoid_texts;

  std::string label() const;  // top terms joined with " / "
};

struct ClusterReport {
  std::vector<ClusterSummary> clusters;
  int selected_k = 0;
  double db_score = 0.0;
  std::vector<KScore> db_curve;
};

// Term frequency over stopword-filtered tokens; ties broken alphabetically.
std::vector<std::string> top_terms(const std::vector<std::string>& texts, std::size_t n);

ClusterReport build_cluster_report(const Matrix& data, const ClusteringResult& clustering,
                                   const std::vector<std::string>& texts,
                                   const std::vector<KScore>& db_curve);

}  // namespace chart_refinery::analytics
