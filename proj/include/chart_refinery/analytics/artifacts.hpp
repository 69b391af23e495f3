#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "chart_refinery/analytics/matrix.hpp"
#include "chart_refinery/analytics/projection.hpp"
#include "chart_refinery/analytics/report.hpp"

namespace chart_refinery::analytics {

inline constexpr char kEmbeddingsMagic[4] = {'C', 'R', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingsVersion = 1;

// embeddings.bin: "CREM", u32 version, u64 N, u64 D, then N*D f32 values,
// row-major, all little-endian.
void write_embeddings_bin(const std::filesystem::path& path, const Matrix& values);
Matrix read_embeddings_bin(const std::filesystem::path& path);

nlohmann::json clusters_json(const ClusterReport& report, const ClusteringResult& clustering,
                             const std::vector<std::string>& ids,
                             const std::vector<std::string>& texts);
void write_projection_csv(const std::filesystem::path& path, const Projection2D& projection);
std::string report_markdown(const ClusterReport& report, std::size_t total_rows);

}  // namespace chart_refinery::analytics
