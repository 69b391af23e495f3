#include "chart_refinery/analytics/evaluation.hpp"

#include <fstream>
#include <sstream>

#include "chart_refinery/analytics/artifacts.hpp"
#include "chart_refinery/analytics/embedding.hpp"
#include "chart_refinery/error.hpp"
#include "chart_refinery/session/hashing.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery::analytics {
namespace fs = std::filesystem;

EvalOptions EvalOptions::from_config(const AnalyticsConfig& cfg) {
  EvalOptions o;
  o.k_min = cfg.k_min;
  o.k_max = cfg.k_max;
  o.seeds = cfg.seeds_per_k;
  o.normalize_cosine = cfg.normalize_cosine;
  o.threads = cfg.threads;
  return o;
}

std::string corpus_hash(const EvalCorpus& corpus, const EmbeddingConfig& cfg) {
  std::string key = cfg.model_name + '\n' + std::to_string(cfg.dims) + '\n';
  for (const auto& t : corpus.texts) {
    key += t;
    key.push_back('\0');
  }
  return sha256_hex(key);
}

void check_eval_request(std::size_t corpus_size, int k_min, int k_max, int seeds) {
  if (k_min < 2 || k_max < k_min) {
    throw Error(ErrorCode::kInvalidInput, "k range must satisfy 2 <= k_min <= k_max",
                {{"k_min", k_min}, {"k_max", k_max}});
  }
  if (seeds < 1) throw Error(ErrorCode::kInvalidInput, "seeds must be at least 1");
  if (corpus_size == 0) throw Error(ErrorCode::kInvalidInput, "corpus has no recommendations");
  if (corpus_size < static_cast<std::size_t>(k_max)) {
    throw Error(ErrorCode::kTooFewRows,
                "corpus has " + std::to_string(corpus_size) + " recommendations, fewer than k_max " +
                    std::to_string(k_max),
                {{"rows", corpus_size}, {"k_max", k_max}});
  }
}

EvalResult run_evaluation(const EvalCorpus& corpus, const EvalOptions& options,
                          const EmbeddingConfig& embed_cfg, EmbeddingBackend& backend,
                          const fs::path& out_dir) {
  check_eval_request(corpus.texts.size(), options.k_min, options.k_max, options.seeds);
  auto report_progress = [&](double f, const std::string& phase) {
    if (options.progress) options.progress(f, phase);
  };
  fs::create_directories(out_dir);

  EvalResult result;
  result.out_dir = out_dir;
  result.corpus_hash = corpus_hash(corpus, embed_cfg);

  report_progress(0.0, "embedding");
  EmbeddingMatrix matrix;
  matrix.ids = corpus.ids;
  std::optional<fs::path> cached;
  if (options.cache_dir) cached = *options.cache_dir / (result.corpus_hash + ".bin");
  if (cached && fs::exists(*cached)) {
    try {
      matrix.values = read_embeddings_bin(*cached);
      result.embeddings_cached = matrix.values.rows() == static_cast<Eigen::Index>(corpus.texts.size()) &&
                                 matrix.values.cols() == static_cast<Eigen::Index>(embed_cfg.dims);
    } catch (const Error&) {
      result.embeddings_cached = false;  // stale or damaged cache entry: re-embed
    }
  }
  if (!result.embeddings_cached) {
    matrix = embed_corpus(corpus.ids, corpus.texts, embed_cfg, backend);
    if (cached) {
      fs::create_directories(cached->parent_path());
      const fs::path tmp = cached->string() + ".tmp";
      write_embeddings_bin(tmp, matrix.values);
      fs::rename(tmp, *cached);
    }
  }
  matrix.validate();
  write_embeddings_bin(out_dir / "embeddings.bin", matrix.values);

  // Cluster on what was written so cached and fresh runs see identical input.
  Matrix data = read_embeddings_bin(out_dir / "embeddings.bin");
  if (options.normalize_cosine) normalize_rows(data);
  EmbeddingMatrix working{matrix.ids, data};

  report_progress(0.3, "clustering");
  SelectKOptions sk;
  sk.k_min = options.k_min;
  sk.k_max = options.k_max;
  sk.seeds = seed_list(options.seeds);
  sk.threads = options.threads;
  sk.progress = [&](std::size_t done, std::size_t total) {
    report_progress(0.3 + 0.6 * static_cast<double>(done) / static_cast<double>(total), "clustering");
  };
  auto selection = select_k(data, sk);
  result.best = selection.best;

  report_progress(0.9, "projecting");
  result.projection = options.projection_file ? attach_external(working, *options.projection_file)
                                              : project_pca(working);
  result.report = build_cluster_report(data, result.best, corpus.texts, selection.curve);

  {
    std::ofstream out(out_dir / "clusters.json", std::ios::trunc);
    out << clusters_json(result.report, result.best, corpus.ids, corpus.texts).dump(2) << '\n';
  }
  write_projection_csv(out_dir / "projection.csv", result.projection);
  {
    std::ofstream out(out_dir / "report.md", std::ios::trunc);
    out << report_markdown(result.report, corpus.texts.size());
  }
  report_progress(1.0, "done");
  return result;
}

EvalCorpus read_recs_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot read recommendations file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  EvalCorpus corpus;
  const std::string text = buf.str();
  std::size_t n = 0;
  for (const auto& line : split_lines(text)) {
    auto t = trim(line);
    if (t.empty()) continue;
    corpus.ids.push_back("rec-" + std::to_string(++n));
    corpus.texts.emplace_back(t);
  }
  return corpus;
}

}  // namespace chart_refinery::analytics
