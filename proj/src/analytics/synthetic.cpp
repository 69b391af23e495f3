#include "chart_refinery/analytics/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "chart_refinery/error.hpp"

namespace chart_refinery::analytics {
namespace {

const char* const kTopicWords[kSyntheticTopics][8] = {
    {"axis", "label", "units", "tick", "scale", "baseline", "range", "ylabel"},
    {"colormap", "rainbow", "palette", "colorblind", "hue", "saturation", "viridis", "contrast"},
    {"legend", "overlap", "placement", "entries", "outside", "corner", "box", "key"},
    {"font", "size", "readable", "typeface", "bold", "small", "text", "fontsize"},
    {"title", "headline", "caption", "subtitle", "descriptive", "heading", "summary", "message"},
    {"gridlines", "clutter", "spines", "ink", "decoration", "border", "background", "chartjunk"},
    {"sort", "order", "descending", "ranking", "categories", "alphabetical", "sequence", "arrange"},
    {"pie", "slices", "angles", "donut", "proportions", "wedges", "circular", "share"},
    {"resolution", "dpi", "pixelated", "blurry", "export", "raster", "sharpness", "vector"},
    {"annotation", "callout", "arrow", "highlight", "outlier", "note", "marker", "emphasis"},
};

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

LabeledMatrix gaussian_blobs(int clusters, int per_cluster, int dims, double sigma,
                             double separation, std::uint64_t seed) {
  if (clusters < 1 || per_cluster < 1 || dims < clusters) {
    throw Error(ErrorCode::kInvalidInput, "blob generator needs dims >= clusters >= 1");
  }
  const int n = clusters * per_cluster;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  LabeledMatrix out;
  out.values.resize(n, dims);
  out.labels.resize(static_cast<std::size_t>(n));
  const double offset = separation / std::sqrt(2.0);
  for (int r = 0; r < n; ++r) {
    const int label = order[static_cast<std::size_t>(r)] / per_cluster;
    out.labels[static_cast<std::size_t>(r)] = label;
    for (int d = 0; d < dims; ++d) out.values(r, d) = g(rng);
    out.values(r, label) += offset;
  }
  return out;
}

LabeledTexts synthetic_topic_texts(int count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::kInvalidInput, "count must be positive");
  std::mt19937_64 rng(seed);
  LabeledTexts out;
  out.texts.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int topic = i % kSyntheticTopics;
    std::vector<int> idx(8);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::string text;
    for (int w = 0; w < 6; ++w) {
      if (!text.empty()) text += ' ';
      text += kTopicWords[topic][idx[static_cast<std::size_t>(w)]];
    }
    out.texts.push_back(std::move(text));
    out.labels.push_back(topic);
  }
  return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::kInvalidInput, "labelings must be non-empty and equal length");
  }
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, c] : joint) index += choose2(c);
  for (const auto& [_, c] : ra) sa += choose2(c);
  for (const auto& [_, c] : rb) sb += choose2(c);
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = sa * sb / total;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace chart_refinery::analytics
