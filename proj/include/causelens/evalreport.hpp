#pragma once

// Answer scoring, accuracy tables, and figure/CSV emission.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causelens/chaingen.hpp"
#include "causelens/error.hpp"
#include "causelens/metrics.hpp"
#include "causelens/simrep.hpp"
#include "causelens/unicode.hpp"

namespace causelens {

// Shortest round-trip decimal representation.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc() ? std::string(buf.data(), ptr) : std::string("nan");
}

inline std::string format_fixed(double v, int decimals) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f", decimals, v);
  std::string s(buf.data());
  if (s == "-0.0" || s == "-0.00" || s == "-0.000" || s == "-0") s.erase(0, 1);
  return s;
}

// ---------------------------------------------------------------------------
// Scoring

struct ScoredSample {
  std::string sample_key;
  std::string domain;
  std::string model;
  Condition condition;
  std::string generated_answer;
  std::string gold_answer;
  bool correct = false;
  std::string normalized_generated;  // first sentence, normalized
  std::string normalized_gold;
  Findings findings;
};

// Case-fold (English only) and drop all punctuation and whitespace.
inline std::string normalize_answer(std::string_view text, Language language) {
  std::u32string out;
  for (char32_t c : unicode::decode(text)) {
    if (unicode::is_whitespace(c) || unicode::is_punctuation(c)) continue;
    out.push_back(language == Language::kEn ? unicode::ascii_lower(c) : c);
  }
  return unicode::encode(out);
}

// Text up to the first sentence terminator that follows some content.
inline std::string first_sentence(std::string_view text) {
  const auto chars = unicode::decode(text);
  bool content = false;
  for (std::size_t i = 0; i < chars.size(); ++i) {
    if (unicode::is_sentence_end(chars[i]) && content) {
      return unicode::encode(std::u32string_view(chars).substr(0, i));
    }
    if (!unicode::is_whitespace(chars[i]) && !unicode::is_punctuation(chars[i])) content = true;
  }
  return std::string(text);
}

inline ScoredSample score_answer(std::string_view generated, std::string_view gold,
                                 Language language) {
  ScoredSample s;
  s.condition.language = language;
  s.generated_answer = generated;
  s.gold_answer = gold;
  s.normalized_generated = normalize_answer(first_sentence(generated), language);
  s.normalized_gold = normalize_answer(gold, language);
  if (s.normalized_generated.empty()) {
    s.findings.push_back({ErrorCode::kEmptyGeneration, "generated_answer",
                          "generation is empty after normalization"});
    return s;
  }
  if (s.normalized_gold.empty()) {
    s.findings.push_back({ErrorCode::kEmptyInput, "gold_answer", "gold answer is empty"});
    return s;
  }
  s.correct = s.normalized_generated.find(s.normalized_gold) != std::string::npos;
  return s;
}

// ---------------------------------------------------------------------------
// Accuracy tables

inline constexpr std::array<std::string_view, 8> kDomainLabels{
    "House", "Nature", "School", "Health", "Shop", "Work", "Trans", "Leisure"};

struct AccuracyRow {
  std::string model;
  Condition condition;
  std::array<std::size_t, 8> correct{};
  std::array<std::size_t, 8> total{};

  std::optional<double> cell(std::size_t d) const {
    if (total[d] == 0) return std::nullopt;
    return 100.0 * static_cast<double>(correct[d]) / static_cast<double>(total[d]);
  }
  // Mean of the present domain cells.
  std::optional<double> average() const {
    double sum = 0.0;
    int n = 0;
    for (std::size_t d = 0; d < 8; ++d) {
      if (auto c = cell(d)) {
        sum += *c;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  }
  std::string label() const {
    std::string out = model + " (" +
                      (condition.language == Language::kEn ? std::string("En") : std::string("Zh"));
    if (condition.order == Order::kReversed) out += ", reversed";
    return out + ")";
  }
};

struct AccuracyTable {
  std::vector<AccuracyRow> rows;

  std::string to_markdown() const {
    std::ostringstream os;
    os << "| Model |";
    for (auto d : kDomainLabels) os << ' ' << d << " |";
    os << " Avg |\n|---|";
    for (std::size_t i = 0; i < kDomainLabels.size(); ++i) os << "---:|";
    os << "---:|\n";
    for (const auto& r : rows) {
      os << "| " << r.label() << " |";
      for (std::size_t d = 0; d < 8; ++d) {
        auto c = r.cell(d);
        os << ' ' << (c ? format_fixed(*c, 1) : std::string("–")) << " |";
      }
      auto avg = r.average();
      os << ' ' << (avg ? format_fixed(*avg, 1) : std::string("–")) << " |\n";
    }
    return os.str();
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "model,language,order,domain,correct,total,accuracy\n";
    for (const auto& r : rows) {
      for (std::size_t d = 0; d < 8; ++d) {
        auto c = r.cell(d);
        os << r.model << ',' << to_string(r.condition.language) << ','
           << to_string(r.condition.order) << ',' << kDomains[d] << ',' << r.correct[d] << ','
           << r.total[d] << ',' << (c ? format_number(*c) : std::string()) << '\n';
      }
      auto avg = r.average();
      os << r.model << ',' << to_string(r.condition.language) << ','
         << to_string(r.condition.order) << ",average,,," << (avg ? format_number(*avg) : "")
         << '\n';
    }
    return os.str();
  }
};

// Rows follow first appearance of each (model, condition) in `scored`.
inline AccuracyTable accuracy_table(const std::vector<ScoredSample>& scored) {
  AccuracyTable table;
  std::map<std::pair<std::string, Condition>, std::size_t> index;
  for (const auto& s : scored) {
    const auto key = std::make_pair(s.model, s.condition);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, table.rows.size()).first;
      table.rows.push_back(AccuracyRow{s.model, s.condition, {}, {}});
    }
    auto d = std::find(kDomains.begin(), kDomains.end(), s.domain);
    if (d == kDomains.end()) continue;
    auto& row = table.rows[it->second];
    const auto di = static_cast<std::size_t>(d - kDomains.begin());
    ++row.total[di];
    if (s.correct) ++row.correct[di];
  }
  return table;
}

// ---------------------------------------------------------------------------
// CSV sidecars

inline std::string trajectories_csv(const std::vector<ConditionAggregate>& aggregates) {
  std::ostringstream os;
  os << "condition,component_id,layer,mean,sd,n\n";
  for (const auto& a : aggregates) {
    for (Eigen::Index l = 0; l < a.mean.size(); ++l) {
      os << a.condition.name() << ',' << a.component_id << ',' << l << ','
         << format_number(a.mean(l)) << ',' << format_number(a.sd(l)) << ',' << a.count << '\n';
    }
  }
  return os.str();
}

inline std::string ratios_csv(const std::vector<RcarResult>& results) {
  std::ostringstream os;
  os << "sample_key,component_id,layer,head,ratio\n";
  for (const auto& r : results) {
    for (Eigen::Index l = 0; l < r.ratio.rows(); ++l) {
      for (Eigen::Index h = 0; h < r.ratio.cols(); ++h) {
        os << r.sample_key << ',' << r.component_id << ',' << l << ',' << h << ','
           << format_number(r.ratio(l, h)) << '\n';
      }
    }
  }
  return os.str();
}

inline std::string diffs_csv(const std::vector<ComponentDiff>& diffs) {
  std::ostringstream os;
  os << "component_id,diff_zh_minus_en\n";
  for (const auto& d : diffs) os << d.component_id << ',' << format_number(d.value) << '\n';
  return os.str();
}

inline std::string cosine_csv(const std::vector<CosineProfile>& profiles) {
  std::ostringstream os;
  os << "condition_pair,layer,mean_cosine,n\n";
  for (const auto& p : profiles) {
    for (Eigen::Index l = 0; l < p.mean.size(); ++l) {
      os << p.pair << ',' << l << ',' << format_number(p.mean(l)) << ','
         << p.count[static_cast<std::size_t>(l)] << '\n';
    }
  }
  return os.str();
}

struct SvccaScore {
  std::string pair;
  double score = 0.0;
  double variance_keep = kDefaultVarianceKeep;
};

inline std::string svcca_csv(const std::vector<SvccaScore>& scores) {
  std::ostringstream os;
  os << "condition_pair,svcca_score,variance_keep\n";
  for (const auto& s : scores) {
    os << s.pair << ',' << format_number(s.score) << ',' << format_number(s.variance_keep) << '\n';
  }
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "short write on '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// SVG

namespace svg {

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) { return format_fixed(v, 2); }

// Sequential colour map (viridis stops), t in [0, 1].
inline std::string colormap(double t) {
  static constexpr std::array<std::array<int, 3>, 9> kStops{{{68, 1, 84},
                                                            {71, 44, 122},
                                                            {59, 81, 139},
                                                            {44, 113, 142},
                                                            {33, 144, 141},
                                                            {39, 173, 129},
                                                            {92, 200, 99},
                                                            {170, 220, 50},
                                                            {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * (kStops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), kStops.size() - 2);
  const double f = pos - static_cast<double>(i);
  std::array<char, 8> buf{};
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(kStops[i][c] + f * (kStops[i + 1][c] - kStops[i][c])));
  }
  std::snprintf(buf.data(), buf.size(), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf.data();
}

// Fixed categorical palette.
inline std::string series_color(std::size_t i) {
  static constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c",
                                                       "#d62728", "#9467bd", "#8c564b",
                                                       "#e377c2", "#7f7f7f"};
  return kPalette[i % kPalette.size()];
}

class Document {
 public:
  Document(double width, double height) : width_(width), height_(height) {}

  void add(std::string element) { body_ += "  " + std::move(element) + "\n"; }

  void text(double x, double y, std::string_view s, std::string_view anchor = "start",
            int size = 12) {
    add("<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
        "\" text-anchor=\"" + std::string(anchor) + "\">" + escape(s) + "</text>");
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#000000") {
    add("<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
        num(y2) + "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"1\"/>");
  }

  void rect(double x, double y, double w, double h, std::string_view fill,
            std::string_view cls = {}) {
    add("<rect" + (cls.empty() ? std::string() : " class=\"" + std::string(cls) + "\"") +
        " x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
        "\" fill=\"" + std::string(fill) + "\"/>");
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke,
                std::string_view cls = "series") {
    std::string p;
    for (const auto& [x, y] : pts) p += (p.empty() ? "" : " ") + num(x) + "," + num(y);
    add("<polyline class=\"" + std::string(cls) + "\" fill=\"none\" stroke=\"" +
        std::string(stroke) + "\" stroke-width=\"1.5\" points=\"" + p + "\"/>");
  }

  std::string str() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           num(width_) + "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " +
           num(height_) + "\" font-family=\"sans-serif\">\n" + "  <rect x=\"0\" y=\"0\" width=\"" +
           num(width_) + "\" height=\"" + num(height_) + "\" fill=\"#ffffff\"/>\n" + body_ +
           "</svg>\n";
  }

 private:
  double width_;
  double height_;
  std::string body_;
};

struct Series {
  std::string label;
  std::vector<double> values;
};

// Line chart over integer x positions 0..n-1.
inline std::string line_chart(std::string_view title, std::string_view x_label,
                              const std::vector<Series>& series) {
  const double W = 640, H = 400, left = 60, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  double lo = 0.0, hi = 0.0;
  std::size_t n = 0;
  bool first = true;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  }
  if (hi - lo < 1e-12) {
    hi += 0.5;
    lo -= 0.5;
  }
  auto px = [&](std::size_t i) { return left + (n > 1 ? pw * i / (n - 1.0) : pw / 2); };
  auto py = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };

  Document doc(W, H);
  doc.text(W / 2, 22, title, "middle", 14);
  doc.line(left, top + ph, left + pw, top + ph);
  doc.line(left, top, left, top + ph);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    doc.line(left - 4, py(v), left, py(v));
    doc.text(left - 6, py(v) + 4, format_fixed(v, 3), "end", 10);
  }
  const std::size_t step = n > 12 ? (n + 11) / 12 : 1;
  for (std::size_t i = 0; i < n; i += step) {
    doc.text(px(i), top + ph + 16, std::to_string(i), "middle", 10);
  }
  doc.text(left + pw / 2, H - 12, x_label, "middle", 11);
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < series[s].values.size(); ++i) {
      if (std::isfinite(series[s].values[i])) pts.emplace_back(px(i), py(series[s].values[i]));
    }
    doc.polyline(pts, series_color(s));
    const double ly = top + 16 * static_cast<double>(s);
    doc.line(left + pw + 12, ly, left + pw + 32, ly, series_color(s));
    doc.text(left + pw + 36, ly + 4, series[s].label, "start", 11);
  }
  return doc.str();
}

// Heatmap with one row per layer and one column per label; colours are
// normalized to this matrix's own min/max, which the legend prints.
inline std::string heatmap(std::string_view title, const Eigen::MatrixXd& values,
                           const std::vector<std::string>& column_labels) {
  const double cell_w = 80, cell_h = 14, left = 60, top = 60;
  const double W = left + cell_w * values.cols() + 140;
  const double H = top + cell_h * values.rows() + 40;
  const double lo = values.size() ? values.minCoeff() : 0.0;
  const double hi = values.size() ? values.maxCoeff() : 0.0;
  const double span = hi - lo;

  Document doc(W, H);
  doc.text(W / 2, 22, title, "middle", 14);
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    const auto label = c < static_cast<Eigen::Index>(column_labels.size())
                           ? column_labels[static_cast<std::size_t>(c)]
                           : std::to_string(c);
    doc.text(left + cell_w * c + cell_w / 2, top - 8, label, "middle", 11);
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    doc.text(left - 6, top + cell_h * r + cell_h - 3, std::to_string(r), "end", 9);
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double t = span > 0 ? (values(r, c) - lo) / span : 0.5;
      doc.rect(left + cell_w * c, top + cell_h * r, cell_w, cell_h, colormap(t), "cell");
    }
  }
  const double lx = left + cell_w * values.cols() + 20;
  const double lh = cell_h * values.rows();
  for (int i = 0; i < 20; ++i) {
    doc.rect(lx, top + lh * i / 20.0, 16, lh / 20.0, colormap(1.0 - i / 19.0), "legend");
  }
  doc.text(lx + 22, top + 10, "max " + format_fixed(hi, 4), "start", 10);
  doc.text(lx + 22, top + lh, "min " + format_fixed(lo, 4), "start", 10);
  doc.text(left - 30, top - 8, "layer", "end", 10);
  return doc.str();
}

// Signed bars, coloured by sign around a zero baseline.
inline std::string bar_chart(std::string_view title, const std::vector<ComponentDiff>& bars) {
  const double bar_w = 34, gap = 10, left = 70, top = 40, ph = 300, bottom = 110;
  const double W = left + (bar_w + gap) * static_cast<double>(bars.size()) + 40;
  const double H = top + ph + bottom;
  double mag = 0.0;
  for (const auto& b : bars) mag = std::max(mag, std::abs(b.value));
  if (mag < 1e-12) mag = 1.0;
  const double zero = top + ph / 2;
  auto py = [&](double v) { return zero - (ph / 2) * v / mag; };

  Document doc(W, H);
  doc.text(W / 2, 22, title, "middle", 14);
  doc.line(left, zero, W - 30, zero);
  doc.line(left, top, left, top + ph);
  for (double v : {-mag, -mag / 2, 0.0, mag / 2, mag}) {
    doc.line(left - 4, py(v), left, py(v));
    doc.text(left - 6, py(v) + 4, format_fixed(v, 3), "end", 10);
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double x = left + gap + (bar_w + gap) * static_cast<double>(i);
    const double v = bars[i].value;
    const double y = v >= 0 ? py(v) : zero;
    doc.rect(x, y, bar_w, std::abs(py(v) - zero), v >= 0 ? "#d95f02" : "#1b9e77", "bar");
    doc.add("<text x=\"" + num(x + bar_w / 2) + "\" y=\"" + num(top + ph + 12) +
            "\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-45 " +
            num(x + bar_w / 2) + " " + num(top + ph + 12) + ")\">" +
            escape(bars[i].component_id) + "</text>");
  }
  return doc.str();
}

}  // namespace svg

// ---------------------------------------------------------------------------
// Figure emission

struct FigureInputs {
  std::vector<ConditionAggregate> aggregates;   // per (condition, component)
  std::vector<TrajectoryMatrix> trajectories;   // causal-role matrices
  std::vector<ComponentDiff> diffs;             // zh - en
  std::vector<CosineProfile> cosine;
};

inline std::string safe_name(std::string_view s) {
  std::string out;
  for (char c : s) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  }
  return out;
}

// Writes SVGs plus the CSVs behind them; returns paths relative to out_dir in
// emission order.
inline std::vector<std::filesystem::path> emit_figures(const FigureInputs& in,
                                                       const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> files;
  auto emit = [&](const std::filesystem::path& rel, const std::string& content) {
    write_text(out_dir / rel, content);
    files.push_back(rel);
  };

  if (!in.aggregates.empty()) {
    std::vector<std::string> components;
    for (const auto& a : in.aggregates) {
      if (std::find(components.begin(), components.end(), a.component_id) == components.end()) {
        components.push_back(a.component_id);
      }
    }
    for (const auto& comp : components) {
      std::vector<svg::Series> series;
      for (const auto& a : in.aggregates) {
        if (a.component_id != comp) continue;
        series.push_back({a.condition.name(), std::vector<double>(a.mean.data(),
                                                                  a.mean.data() + a.mean.size())});
      }
      emit("figures/trajectory_" + safe_name(comp) + ".svg",
           svg::line_chart("Layerwise RCAR: " + comp, "layer", series));
    }
    emit("figures/trajectories.csv", trajectories_csv(in.aggregates));
  }

  for (const auto& t : in.trajectories) {
    const auto name = t.condition.name();
    emit("figures/heatmap_" + name + ".svg",
         svg::heatmap("Causal-component RCAR (" + name + ")", t.values,
                      {"cause", "intermediate", "final"}));
    std::ostringstream csv;
    csv << "layer,cause,intermediate,final\n";
    for (Eigen::Index l = 0; l < t.values.rows(); ++l) {
      csv << l;
      for (Eigen::Index c = 0; c < t.values.cols(); ++c) csv << ',' << format_number(t.values(l, c));
      csv << '\n';
    }
    emit("figures/heatmap_" + name + ".csv", csv.str());
  }

  if (!in.diffs.empty()) {
    emit("figures/component_diff.svg",
         svg::bar_chart("Summed RCAR difference (zh - en)", in.diffs));
    emit("figures/component_diff.csv", diffs_csv(in.diffs));
  }

  if (!in.cosine.empty()) {
    std::vector<svg::Series> series;
    for (const auto& p : in.cosine) {
      series.push_back({p.pair, std::vector<double>(p.mean.data(), p.mean.data() + p.mean.size())});
    }
    emit("figures/cosine.svg",
         svg::line_chart("Layerwise cosine similarity at the anchor", "layer", series));
    emit("figures/cosine.csv", cosine_csv(in.cosine));
  }
  return files;
}

}  // namespace causelens
