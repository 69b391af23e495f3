#include "chart_refinery/backend/mock.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "chart_refinery/session/hashing.hpp"
#include "chart_refinery/text.hpp"

namespace chart_refinery {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCritiquePromptPrefix = "You are an expert in data visualization.";
constexpr const char* kBrokenScript =
    "import matplotlib.pyplot as plt\n"
    "plt.bar([1, 2, 3], [3, 1, 2]\n";

std::string fenced(const std::string& code) { return "```python\n" + code + "\n```"; }

// Inserts `line` before the first display/save call, else appends it.
std::string insert_before_output(const std::string& source, const std::string& line) {
  auto lines = split_lines(source);
  std::ostringstream out;
  bool inserted = false;
  for (auto l : lines) {
    auto t = trim_left(l);
    if (!inserted && (t.starts_with("plt.show(") || t.find("savefig(") != std::string_view::npos)) {
      out << line << '\n';
      inserted = true;
    }
    out << l << '\n';
  }
  if (!inserted) out << line << '\n';
  return out.str();
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

bool has(const std::string& s, const char* needle) { return s.find(needle) != std::string::npos; }

bool legend_without_loc(const std::string& s) {
  for (auto line : split_lines(s)) {
    if (line.find("legend(") != std::string_view::npos &&
        line.find("loc=") == std::string_view::npos && !trim_left(line).starts_with("#")) {
      return true;
    }
  }
  return false;
}

std::string move_legend_outside(const std::string& s) {
  std::ostringstream out;
  for (auto line_view : split_lines(s)) {
    std::string line(line_view);
    std::size_t open = line.find("legend(");
    if (open != std::string::npos && line.find("loc=") == std::string::npos &&
        !trim_left(line_view).starts_with("#")) {
      std::size_t start = open + 7;
      int depth = 1;
      std::size_t close = start;
      for (; close < line.size() && depth > 0; ++close) {
        if (line[close] == '(') ++depth;
        if (line[close] == ')') --depth;
      }
      if (depth == 0) {
        --close;  // index of the matching ')'
        const bool empty_args = trim(std::string_view(line).substr(start, close - start)).empty();
        line.insert(close, std::string(empty_args ? "" : ", ") +
                               "loc=\"upper left\", bbox_to_anchor=(1.02, 1)");
      }
    }
    out << line << '\n';
  }
  return out.str();
}

const std::regex& small_font_re() {
  static const std::regex re(R"((fontsize|labelsize)\s*=\s*(\d+))");
  return re;
}

bool small_font(const std::string& s) {
  for (std::sregex_iterator it(s.begin(), s.end(), small_font_re()), end; it != end; ++it) {
    if (std::stoi((*it)[2]) < 8) return true;
  }
  return false;
}

std::string enlarge_fonts(const std::string& s) {
  std::string out;
  auto begin = s.cbegin();
  for (std::sregex_iterator it(s.begin(), s.end(), small_font_re()), end; it != end; ++it) {
    const auto& m = *it;
    out.append(begin, m[0].first);
    out += std::stoi(m[2]) < 8 ? m[1].str() + "=10" : m[0].str();
    begin = m[0].second;
  }
  out.append(begin, s.cend());
  return out;
}

const std::regex& dpi_re() {
  static const std::regex re(R"(dpi\s*=\s*(\d+))");
  return re;
}

bool low_dpi(const std::string& s) {
  for (std::sregex_iterator it(s.begin(), s.end(), dpi_re()), end; it != end; ++it) {
    if (std::stoi((*it)[1]) < 100) return true;
  }
  return false;
}

std::string raise_dpi(const std::string& s) {
  return std::regex_replace(s, dpi_re(), "dpi=150");
}

}  // namespace

const std::vector<MockDesignRule>& mock_design_rules() {
  static const std::vector<MockDesignRule> rules = {
      {"Chart lacks a descriptive title",
       [](const std::string& s) { return !has(s, "title("); },
       [](const std::string& s) { return insert_before_output(s, "plt.title(\"Overview\")"); }},
      {"X-axis lacks a descriptive label",
       [](const std::string& s) { return !has(s, "xlabel(") && !has(s, ".pie("); },
       [](const std::string& s) { return insert_before_output(s, "plt.xlabel(\"Category\")"); }},
      {"Y-axis lacks a label with units",
       [](const std::string& s) { return !has(s, "ylabel(") && !has(s, ".pie("); },
       [](const std::string& s) { return insert_before_output(s, "plt.ylabel(\"Value (units)\")"); }},
      {"Rainbow colormap is not colorblind-safe; use a perceptually uniform palette",
       [](const std::string& s) { return has(s, "jet") || has(s, "rainbow"); },
       [](const std::string& s) {
         return replace_all(replace_all(s, "rainbow", "viridis"), "jet", "viridis");
       }},
      {"Legend overlaps the plot area; place it outside the axes", legend_without_loc,
       move_legend_outside},
      {"Tick label font size is too small to read", small_font, enlarge_fonts},
      {"Figure resolution is too low for print or slides", low_dpi, raise_dpi},
      {"3D projection distorts value comparisons; use a 2D chart",
       [](const std::string& s) { return has(s, "projection=\"3d\""); }, nullptr},
      {"Pie chart makes precise comparisons difficult; consider a bar chart",
       [](const std::string& s) { return has(s, ".pie("); }, nullptr},
  };
  return rules;
}

std::string generated_chart_script(const std::string& image_sha256) {
  std::mt19937_64 rng(fnv1a64(image_sha256));
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };
  std::uniform_int_distribution<int> value(5, 95);

  static const std::vector<std::vector<std::string>> kCategorySets = {
      {"North", "South", "East", "West", "Central"},
      {"Q1", "Q2", "Q3", "Q4"},
      {"Apples", "Pears", "Plums", "Cherries", "Grapes", "Figs"},
      {"2019", "2020", "2021", "2022", "2023"},
  };
  const auto& cats = kCategorySets[rng() % kCategorySets.size()];
  const int kind = static_cast<int>(rng() % 10);  // 0-4 bar, 5-7 line, 8 scatter, 9 pie
  const bool three_d = kind >= 5 && kind <= 7 && coin(0.15);

  std::ostringstream s;
  s << "import matplotlib.pyplot as plt\nimport numpy as np\n\n";
  s << "categories = [";
  for (std::size_t i = 0; i < cats.size(); ++i) s << (i ? ", " : "") << '"' << cats[i] << '"';
  s << "]\nvalues = [";
  for (std::size_t i = 0; i < cats.size(); ++i) s << (i ? ", " : "") << value(rng);
  s << "]\n";
  s << "fig = plt.figure(figsize=(6.4, 4.8), dpi=" << (coin(0.3) ? 60 : 100) << ")\n";
  s << (three_d ? "ax = fig.add_subplot(111, projection=\"3d\")\n" : "ax = fig.add_subplot(111)\n");
  const bool rainbow = coin(0.5);
  s << "colors = plt.cm." << (rainbow ? (coin(0.5) ? "jet" : "rainbow") : "viridis")
    << "(np.linspace(0, 1, len(values)))\n";
  if (kind <= 4) {
    s << "ax.bar(categories, values, color=colors, label=\"Observed\")\n";
  } else if (kind <= 7) {
    if (three_d) {
      s << "ax.plot(np.arange(len(values)), values, zs=0, label=\"Observed\")\n";
    } else {
      s << "ax.plot(categories, values, marker=\"o\", color=colors[0], label=\"Observed\")\n";
    }
  } else if (kind == 8) {
    s << "ax.scatter(np.arange(len(values)), values, c=colors, label=\"Observed\")\n";
  } else {
    s << "ax.pie(values, labels=categories, colors=colors)\n";
  }
  if (coin(0.5)) s << "ax.set_title(\"Observed values by category\")\n";
  if (coin(0.5)) s << "ax.set_xlabel(\"Category\")\n";
  if (coin(0.5)) s << "ax.set_ylabel(\"Value\")\n";
  if (coin(0.5)) s << (coin(0.5) ? "ax.legend()\n" : "ax.legend(loc=\"best\")\n");
  if (coin(0.4)) s << "ax.tick_params(labelsize=" << (coin(0.6) ? 6 : 10) << ")\n";
  s << "plt.show()\n";
  return s.str();
}

MockChartCoder::MockChartCoder(fs::path fixtures_dir) {
  if (fixtures_dir.empty()) return;
  fs::path index = fixtures_dir / "index.json";
  std::ifstream in(index);
  if (!in) return;
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (!doc.is_object()) {
    throw Error(ErrorCode::kInvalidConfig, "mock fixture index is not a JSON object: " + index.string());
  }
  for (const auto& [sha, file] : doc.items()) {
    std::ifstream script(fixtures_dir / file.get<std::string>());
    if (!script) {
      throw Error(ErrorCode::kInvalidConfig, "mock fixture missing: " + file.get<std::string>());
    }
    std::stringstream buf;
    buf << script.rdbuf();
    fixtures_[sha] = buf.str();
  }
}

void MockChartCoder::fail_next(int n, ErrorCode code) {
  std::lock_guard lock(mu_);
  pending_failures_ = n;
  failure_code_ = code;
}

void MockChartCoder::override_completion(std::optional<std::string> text) {
  std::lock_guard lock(mu_);
  override_ = std::move(text);
}

std::string MockChartCoder::complete(const std::string&, const ChartImage& image) {
  ++calls_;
  std::lock_guard lock(mu_);
  if (pending_failures_ > 0) {
    --pending_failures_;
    throw Error(failure_code_, "mock chart coder: injected failure", nullptr,
                failure_code_ == ErrorCode::kBackendFailure ? 503 : 0);
  }
  if (override_) return *override_;
  auto it = fixtures_.find(image.sha256);
  std::string code = it != fixtures_.end() ? it->second : generated_chart_script(image.sha256);
  while (!code.empty() && code.back() == '\n') code.pop_back();
  return "Here is the Matplotlib code that reproduces the chart:\n\n" + fenced(code) + "\n";
}

MockCritic::MockCritic(MockCriticOptions options) : options_(std::move(options)) {}

std::vector<std::string> MockCritic::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

std::string MockCritic::complete(const std::string& prompt) {
  {
    std::lock_guard lock(mu_);
    prompts_.push_back(prompt);
    if (options_.unreachable) {
      throw Error(ErrorCode::kBackendUnreachable, "mock llm: unreachable (injected)");
    }
    if (options_.transient_failures > 0) {
      --options_.transient_failures;
      throw Error(ErrorCode::kBackendTimeout, "mock llm: timeout (injected)");
    }
  }
  if (std::string_view(prompt).starts_with(kCritiquePromptPrefix)) return critique(prompt);
  return edit(prompt);
}

std::string MockCritic::critique(const std::string& prompt) {
  ++critique_calls_;
  {
    std::lock_guard lock(mu_);
    if (options_.critique_override) return *options_.critique_override;
  }
  std::size_t sep = prompt.find("\n\n");
  std::string source = sep == std::string::npos ? std::string() : prompt.substr(sep + 2);
  std::ostringstream out;
  int n = 0;
  for (const auto& rule : mock_design_rules()) {
    if (rule.detect(source)) {
      out << "# " << rule.issue << '\n';
      ++n;
    }
  }
  if (n == 0) return "The chart already follows common design guidelines.";
  return out.str();
}

std::string MockCritic::edit(const std::string& prompt) {
  const int call = ++edit_calls_;
  {
    std::lock_guard lock(mu_);
    if (options_.always_broken_edits || call <= options_.broken_edits) {
      return "Here is the updated script:\n" + fenced(kBrokenScript);
    }
  }
  // Selected issues: the numbered list; base script: the first fenced block.
  std::vector<std::string> selected;
  static const std::regex item(R"(^\s*\d+\.\s+(.*\S)\s*$)");
  std::string source;
  bool in_fence = false;
  bool fence_done = false;
  for (auto line_view : split_lines(prompt)) {
    std::string line(line_view);
    if (trim_left(line_view).starts_with("```")) {
      if (!fence_done) {
        if (in_fence) fence_done = true;
        in_fence = !in_fence;
      }
      continue;
    }
    if (in_fence) {
      source += line + '\n';
    } else if (!fence_done) {
      std::smatch m;
      if (std::regex_match(line, m, item)) selected.push_back(m[1]);
    }
  }
  for (const auto& text : selected) {
    const auto& rules = mock_design_rules();
    auto rule = std::find_if(rules.begin(), rules.end(),
                             [&](const MockDesignRule& r) { return r.issue == text; });
    if (rule != rules.end() && rule->fix) {
      source = rule->fix(source);
    } else {
      source = insert_before_output(source, "# Requested change: " + text);
    }
  }
  while (!source.empty() && source.back() == '\n') source.pop_back();
  return fenced(source) + "\n";
}

double token_overlap(const std::string& a, const std::string& b) {
  auto ta = content_tokens(a);
  auto tb = content_tokens(b);
  std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  return static_cast<double>(common) / static_cast<double>(std::max(sa.size(), sb.size()));
}

std::vector<float> MockEmbedder::embed_one(const std::string& text) const {
  // Component 0 carries a shared offset; the rest is the normalized sum of
  // per-token gaussian directions (nearly orthogonal in high dimension).
  constexpr double kOffsetSq = 1.25;
  std::vector<double> base(dims_, 0.0);
  auto tokens = content_tokens(text);
  std::set<std::string> unique(tokens.begin(), tokens.end());
  if (unique.empty()) unique.insert("\x01" + text);
  for (const auto& tok : unique) {
    std::mt19937_64 rng(fnv1a64(tok));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> dir(dims_, 0.0);
    double norm = 0.0;
    for (std::size_t d = 1; d < dims_; ++d) {
      dir[d] = g(rng);
      norm += dir[d] * dir[d];
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 1; d < dims_; ++d) base[d] += dir[d] / norm;
  }
  double bnorm = 0.0;
  for (double v : base) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  std::vector<float> out(dims_);
  const double total = std::sqrt(kOffsetSq + 1.0);
  out[0] = static_cast<float>(std::sqrt(kOffsetSq) / total);
  for (std::size_t d = 1; d < dims_; ++d) {
    out[d] = static_cast<float>(base[d] / bnorm / total);
  }
  return out;
}

std::vector<std::vector<float>> MockEmbedder::embed(std::span<const std::string> texts) {
  ++calls_;
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

}  // namespace chart_refinery
