#include "chart_refinery/analytics/artifacts.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "chart_refinery/error.hpp"

namespace chart_refinery::analytics {
namespace {

static_assert(std::endian::native == std::endian::little,
              "embeddings.bin writer assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error(ErrorCode::kCorruptRecord, "truncated embeddings file " + path.string());
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_embeddings_bin(const std::filesystem::path& path, const Matrix& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInternal, "cannot write " + path.string());
  out.write(kEmbeddingsMagic, 4);
  put<std::uint32_t>(out, kEmbeddingsVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(values.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(values.cols()));
  std::vector<float> row(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = static_cast<float>(values(i, j));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::kInternal, "short write to " + path.string());
}

Matrix read_embeddings_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kEmbeddingsMagic, 4) != 0) {
    throw Error(ErrorCode::kCorruptRecord, "bad magic in " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kEmbeddingsVersion) {
    throw Error(ErrorCode::kCorruptRecord, "unsupported embeddings version " + std::to_string(version));
  }
  const auto n = get<std::uint64_t>(in, path);
  const auto d = get<std::uint64_t>(in, path);
  if (n > (1ull << 32) || d > (1ull << 20)) {
    throw Error(ErrorCode::kCorruptRecord, "implausible embeddings shape in " + path.string());
  }
  Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<float> row(d);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(d * sizeof(float)))) {
      throw Error(ErrorCode::kCorruptRecord, "truncated embeddings file " + path.string());
    }
    for (std::uint64_t j = 0; j < d; ++j) {
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return values;
}

nlohmann::json clusters_json(const ClusterReport& report, const ClusteringResult& clustering,
                             const std::vector<std::string>& ids,
                             const std::vector<std::string>& texts) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& s : report.db_curve) {
    curve.push_back({{"k", s.k},
                     {"db_score", s.db_score ? nlohmann::json(*s.db_score) : nlohmann::json(nullptr)},
                     {"seed", s.seed},
                     {"inertia", s.inertia}});
  }
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : report.clusters) {
    nlohmann::json medoids = nlohmann::json::array();
    for (std::size_t i = 0; i < c.medoid_rows.size(); ++i) {
      medoids.push_back({{"id", ids[c.medoid_rows[i]]}, {"text", c.medoid_texts[i]}});
    }
    clusters.push_back({{"index", c.index},
                        {"size", c.size},
                        {"label", c.label()},
                        {"top_terms", c.top_terms},
                        {"medoids", std::move(medoids)}});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    rows.push_back({{"id", ids[i]}, {"cluster", clustering.assignments[i]}, {"text", texts[i]}});
  }
  return {{"selected_k", report.selected_k},
          {"db_score", report.db_score},
          {"seed", clustering.seed},
          {"inertia", clustering.inertia},
          {"db_curve", std::move(curve)},
          {"clusters", std::move(clusters)},
          {"rows", std::move(rows)}};
}

void write_projection_csv(const std::filesystem::path& path, const Projection2D& projection) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInternal, "cannot write " + path.string());
  out << "id,x,y\n";
  for (std::size_t i = 0; i < projection.ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << csv_field(projection.ids[i]) << ',' << fmt_double(projection.coords(r, 0)) << ','
        << fmt_double(projection.coords(r, 1)) << '\n';
  }
}

std::string report_markdown(const ClusterReport& report, std::size_t total_rows) {
  std::ostringstream md;
  md << "# Recommendation clusters\n\n";
  md << "- Recommendations: " << total_rows << "\n";
  md << "- Selected k: " << report.selected_k << "\n";
  md << "- Davies-Bouldin index: " << fmt_double(report.db_score) << "\n\n";
  md << "## Davies-Bouldin by k\n\n| k | DB | seed |\n|---|---|---|\n";
  for (const auto& s : report.db_curve) {
    md << "| " << s.k << " | " << (s.db_score ? fmt_double(*s.db_score) : std::string("degenerate"))
       << " | " << s.seed << " |\n";
  }
  md << "\n## Clusters\n";
  for (const auto& c : report.clusters) {
    md << "\n### Cluster " << c.index << " (" << c.size << "): " << c.label() << "\n\n";
    for (const auto& t : c.medoid_texts) md << "- " << t << "\n";
  }
  return md.str();
}

}  // namespace chart_refinery::analytics
