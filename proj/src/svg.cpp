#include <algorithm>
#include <cstdio>
#include <string>

#include "vad/embed.hpp"
#include "vad/surrogate.hpp"

namespace vad {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 600.0;
constexpr double kMargin = 40.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string svg_open(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
}

// Legend swatches are rects so that circles stay one-per-point.
std::string legend(double x, double y) {
  std::string out = "<g class=\"legend\">\n";
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const auto label = static_cast<Label>(k);
    const double row = y + 18.0 * static_cast<double>(k);
    out += "<rect x=\"" + num(x) + "\" y=\"" + num(row - 9.0) + "\" width=\"10\" height=\"10\" fill=\"" +
           std::string(label_colour(label)) + "\"/>";
    out += "<text x=\"" + num(x + 16.0) + "\" y=\"" + num(row) + "\">" + std::string(rule_class_name(label)) + "</text>\n";
  }
  out += "</g>\n";
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  double map(double v, double out_lo, double out_hi) const {
    const double span = hi - lo;
    const double t = span > 0.0 ? (v - lo) / span : 0.5;
    return out_lo + t * (out_hi - out_lo);
  }
};

}  // namespace

std::string_view label_colour(Label label) noexcept {
  switch (label) {
    case Label::Potential:
      return "#ff8c00";
    case Label::HighScore:
      return "#d62728";
    case Label::Normal:
      break;
  }
  return "#9e9e9e";
}

std::string format_embedding_csv(const Embedding& embedding) {
  std::string out = "x,y,label,timestamp\n";
  for (Eigen::Index i = 0; i < embedding.Y.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out += format_double(embedding.Y(i, 0)) + "," + format_double(embedding.Y(i, 1)) + ",";
    out += k < embedding.labels.size() ? label_name(embedding.labels[k]) : label_name(Label::Normal);
    out += ",";
    if (k < embedding.timestamps.size()) out += format_timestamp(embedding.timestamps[k]);
    out += "\n";
  }
  return out;
}

std::string render_map_svg(const Embedding& embedding) {
  const Eigen::Index n = embedding.Y.rows();
  Range xr, yr;
  if (n > 0) {
    xr = {embedding.Y.col(0).minCoeff(), embedding.Y.col(0).maxCoeff()};
    yr = {embedding.Y.col(1).minCoeff(), embedding.Y.col(1).maxCoeff()};
  }
  const double plot_right = kWidth - 190.0;

  std::string out = svg_open(kWidth, kHeight);
  // Anomalies are drawn last so they stay visible on top of the normal cloud.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  auto label_at = [&](Eigen::Index i) {
    const auto k = static_cast<std::size_t>(i);
    return k < embedding.labels.size() ? embedding.labels[k] : Label::Normal;
  };
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return label_at(a) < label_at(b); });
  out += "<g class=\"points\">\n";
  for (Eigen::Index i : order) {
    const double x = xr.map(embedding.Y(i, 0), kMargin, plot_right);
    const double y = yr.map(embedding.Y(i, 1), kHeight - kMargin, kMargin);
    out += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"2.5\" fill=\"" +
           std::string(label_colour(label_at(i))) + "\"/>\n";
  }
  out += "</g>\n";
  out += legend(plot_right + 20.0, kMargin + 10.0);
  out += "</svg>\n";
  return out;
}

void export_map(const Embedding& embedding, const std::filesystem::path& directory) {
  write_text_file(directory / "embedding.csv", format_embedding_csv(embedding));
  write_text_file(directory / "embedding.svg", render_map_svg(embedding));
}

std::string render_timeline_svg(std::span<const AnomalyVerdict> verdicts, const Thresholds& thresholds,
                                std::span<const TruthEntry> truth, int cadence_seconds) {
  const double left = 70.0, right = kWidth - 190.0, top = 30.0, bottom = kHeight - 50.0;
  std::string out = svg_open(kWidth, kHeight);
  if (verdicts.empty()) {
    out += "<text x=\"" + num(left) + "\" y=\"" + num(top + 20.0) + "\">no verdicts</text>\n";
    out += legend(right + 20.0, top + 10.0);
    out += "</svg>\n";
    return out;
  }

  const double t0 = static_cast<double>(micros_since_epoch(verdicts.front().timestamp)) * 1e-6;
  const double t1 = static_cast<double>(micros_since_epoch(verdicts.back().timestamp)) * 1e-6;
  Range tr{t0, t1};
  double smax = thresholds.high_cut;
  for (const auto& v : verdicts) smax = std::max(smax, v.score);
  Range sr{0.0, smax * 1.05};
  auto x_of = [&](Timestamp t) { return tr.map(static_cast<double>(micros_since_epoch(t)) * 1e-6, left, right); };

  // Truth-anomalous frames as a light band behind the trace.
  out += "<g class=\"truth\" opacity=\"0.25\">\n";
  const double bar = std::max(1.0, (right - left) * cadence_seconds / std::max(t1 - t0, 1.0));
  for (const auto& e : truth) {
    if (!e.anomalous || e.timestamp < verdicts.front().timestamp || e.timestamp > verdicts.back().timestamp) continue;
    out += "<rect x=\"" + num(x_of(e.timestamp)) + "\" y=\"" + num(top) + "\" width=\"" + num(bar) + "\" height=\"" +
           num(bottom - top) + "\" fill=\"#1f77b4\"/>\n";
  }
  out += "</g>\n";

  out += "<g class=\"axes\" stroke=\"#000000\">\n";
  out += "<line x1=\"" + num(left) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(right) + "\" y2=\"" + num(bottom) + "\"/>\n";
  out += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" + num(bottom) + "\"/>\n";
  out += "</g>\n";
  out += "<text x=\"" + num(left) + "\" y=\"" + num(bottom + 20.0) + "\">" + format_timestamp(verdicts.front().timestamp) + "</text>\n";
  out += "<text x=\"" + num(right) + "\" y=\"" + num(bottom + 20.0) + "\" text-anchor=\"end\">" +
         format_timestamp(verdicts.back().timestamp) + "</text>\n";
  out += "<text x=\"" + num(left - 8.0) + "\" y=\"" + num(top + 4.0) + "\" text-anchor=\"end\">" + num(sr.hi) + "</text>\n";
  out += "<text x=\"" + num(left - 8.0) + "\" y=\"" + num(bottom) + "\" text-anchor=\"end\">0</text>\n";

  for (const auto& [value, name] : {std::pair{thresholds.tau, "tau"}, std::pair{thresholds.high_cut, "high"}}) {
    const double y = sr.map(value, bottom, top);
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(right) + "\" y2=\"" + num(y) +
           "\" stroke=\"#555555\" stroke-dasharray=\"4 3\"/>";
    out += "<text x=\"" + num(right + 4.0) + "\" y=\"" + num(y + 4.0) + "\">" + name + "</text>\n";
  }

  // Score trace, broken wherever consecutive verdicts are more than one cadence apart.
  out += "<g class=\"score\" fill=\"none\" stroke=\"#333333\" stroke-width=\"0.8\">\n";
  const auto gap = std::chrono::seconds(cadence_seconds);
  std::string points;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (i > 0 && verdicts[i].timestamp - verdicts[i - 1].timestamp > gap) {
      out += "<polyline points=\"" + points + "\"/>\n";
      points.clear();
    }
    if (!points.empty()) points += ' ';
    points += num(x_of(verdicts[i].timestamp)) + "," + num(sr.map(verdicts[i].score, bottom, top));
  }
  out += "<polyline points=\"" + points + "\"/>\n</g>\n";

  out += "<g class=\"flags\">\n";
  for (const auto& v : verdicts) {
    if (v.label == Label::Normal) continue;
    out += "<circle cx=\"" + num(x_of(v.timestamp)) + "\" cy=\"" + num(sr.map(v.score, bottom, top)) + "\" r=\"2\" fill=\"" +
           std::string(label_colour(v.label)) + "\"/>\n";
  }
  out += "</g>\n";
  out += legend(right + 40.0, top + 40.0);
  out += "</svg>\n";
  return out;
}

}  // namespace vad
