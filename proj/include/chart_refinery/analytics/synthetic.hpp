#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chart_refinery/analytics/matrix.hpp"

namespace chart_refinery::analytics {

struct LabeledMatrix {
  Matrix values;
  std::vector<int> labels;
};

// `clusters` isotropic Gaussian blobs of `per_cluster` points in `dims`
// dimensions. Center c is (separation / sqrt 2) * e_c, so every pair of
// centers is exactly `separation` apart. Rows are shuffled.
LabeledMatrix gaussian_blobs(int clusters, int per_cluster, int dims, double sigma,
                             double separation, std::uint64_t seed);

struct LabeledTexts {
  std::vector<std::string> texts;
  std::vector<int> labels;
};

inline constexpr int kSyntheticTopics = 10;

// Recommendation-like sentences drawn from kSyntheticTopics disjoint
// vocabularies. Each text uses 6 of its topic's 8 words, so under the mock
// embedder same-topic texts land close together and topics separate.
LabeledTexts synthetic_topic_texts(int count, std::uint64_t seed);

// Adjusted Rand index between two labelings of the same rows.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace chart_refinery::analytics
