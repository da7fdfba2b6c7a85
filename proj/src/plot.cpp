#include "quadmcv/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "quadmcv/errors.hpp"

namespace quadmcv::plot {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 78.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 52.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

const char* colour(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string escape(const std::string& s) {
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

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Rounded tick step giving roughly `target` intervals.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  return mag * (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0);
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      const double pad = std::max(std::abs(hi) * 0.1, 1e-9);
      lo -= pad;
      hi += pad;
    }
  }
};

std::string fmt_tick(double v, double step) {
  if (std::abs(v) < step * 1e-6) return "0";
  if (std::abs(v) >= 1e4 || std::abs(v) < 1e-3) return fmt::format("{:.2g}", v);
  return fmt::format("{:.6g}", v);
}

// Axes, ticks and labels for a panel at vertical offset y0; returns the
// data-to-pixel maps.
struct Frame {
  double y0;
  Range xr;
  Range yr;
  double px(double x) const { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    return y0 + kTop + (yr.hi - y) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
  }
};

void draw_frame(std::string& svg, const Frame& f, const std::string& title,
                const std::string& xlabel, const std::string& ylabel, bool x_ticks) {
  const double x1 = kLeft;
  const double x2 = kWidth - kRight;
  const double y1 = f.y0 + kTop;
  const double y2 = f.y0 + kHeight - kBottom;
  svg += fmt::format(
      "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" "
      "stroke=\"#333\"/>\n",
      x1, y1, x2 - x1, y2 - y1);
  svg += fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
      (x1 + x2) / 2, f.y0 + 24, escape(title));
  if (!xlabel.empty()) {
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
        (x1 + x2) / 2, y2 + 40, escape(xlabel));
  }
  svg += fmt::format(
      "<text transform=\"translate({:.1f},{:.1f}) rotate(-90)\" text-anchor=\"middle\" "
      "font-size=\"12\">{}</text>\n",
      18.0, (y1 + y2) / 2, escape(ylabel));

  const double ys = nice_step(f.yr.hi - f.yr.lo, 5);
  for (double v = std::ceil(f.yr.lo / ys) * ys; v <= f.yr.hi + ys * 1e-9; v += ys) {
    const double y = f.py(v);
    svg += fmt::format(
        "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", x1,
        y, x2, y);
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
        x1 - 6, y + 4, fmt_tick(v, ys));
  }
  if (!x_ticks) return;
  const double xs = nice_step(f.xr.hi - f.xr.lo, 8);
  for (double v = std::ceil(f.xr.lo / xs) * xs; v <= f.xr.hi + xs * 1e-9; v += xs) {
    const double x = f.px(v);
    svg += fmt::format(
        "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#333\"/>\n", x,
        y2, x, y2 + 5);
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n", x,
        y2 + 18, fmt_tick(v, xs));
  }
}

void draw_legend(std::string& svg, double y0, const std::vector<std::string>& labels) {
  const double x = kWidth - kRight + 14;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = y0 + kTop + 10 + 18.0 * static_cast<double>(i);
    svg += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"14\" height=\"4\" fill=\"{}\"/>\n", x, y - 4,
        colour(i));
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n", x + 20,
                       y + 1, escape(labels[i]));
  }
}

std::string header(double height) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
      "viewBox=\"0 0 {0:.0f} {1:.0f}\" font-family=\"sans-serif\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, height);
}

void draw_lines(std::string& svg, const LineChart& chart, double y0) {
  Frame f{y0, {}, {}};
  for (const auto& s : chart.series) {
    for (double v : s.x) f.xr.add(v);
    for (double v : s.y) f.yr.add(v);
  }
  f.xr.finish();
  f.yr.finish();
  draw_frame(svg, f, chart.title, chart.xlabel, chart.ylabel, true);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const Series& s = chart.series[i];
    labels.push_back(s.label);
    std::string points;
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      points += fmt::format("{:.2f},{:.2f} ", f.px(s.x[k]), f.py(s.y[k]));
    }
    if (!points.empty()) points.pop_back();
    svg += fmt::format(
        "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", colour(i),
        points);
  }
  draw_legend(svg, y0, labels);
}

}  // namespace

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError(fmt::format("csv has no column '{}'", name));
  const auto idx = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[idx]);
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(fmt::format("{}: empty file", path.string()));
  table.header = split(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != table.header.size()) {
      throw ConfigError(fmt::format("{} line {}: expected {} fields, got {}", path.string(),
                                    line_no, table.header.size(), fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (f.empty() || used != f.size()) {
        throw ConfigError(
            fmt::format("{} line {}: cannot parse '{}'", path.string(), line_no, f));
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string render_svg(const LineChart& chart) {
  std::string svg = header(kHeight);
  draw_lines(svg, chart, 0.0);
  svg += "</svg>\n";
  return svg;
}

std::string render_svg(const std::vector<LineChart>& panels) {
  std::string svg = header(kHeight * static_cast<double>(std::max<std::size_t>(1, panels.size())));
  for (std::size_t i = 0; i < panels.size(); ++i) {
    draw_lines(svg, panels[i], kHeight * static_cast<double>(i));
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_svg(const BarChart& chart) {
  std::string svg = header(kHeight);
  Frame f{0.0, {}, {}};
  f.yr.add(0.0);
  for (const auto& g : chart.values) {
    for (double v : g) f.yr.add(v);
  }
  f.yr.finish();
  f.yr.hi *= 1.05;
  const std::size_t nc = std::max<std::size_t>(1, chart.categories.size());
  f.xr.lo = 0.0;
  f.xr.hi = static_cast<double>(nc);
  draw_frame(svg, f, chart.title, "", chart.ylabel, false);

  const std::size_t ng = std::max<std::size_t>(1, chart.values.size());
  const double slot = (f.px(1.0) - f.px(0.0));
  const double bar = slot * 0.8 / static_cast<double>(ng);
  for (std::size_t c = 0; c < chart.categories.size(); ++c) {
    const double x0 = f.px(static_cast<double>(c)) + slot * 0.1;
    for (std::size_t g = 0; g < chart.values.size(); ++g) {
      if (c >= chart.values[g].size() || !std::isfinite(chart.values[g][c])) continue;
      const double v = chart.values[g][c];
      const double top = f.py(std::max(v, 0.0));
      const double bottom = f.py(std::min(v, 0.0));
      svg += fmt::format(
          "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
          x0 + bar * static_cast<double>(g), top, bar * 0.95, bottom - top, colour(g));
    }
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
        x0 + slot * 0.4, kHeight - kBottom + 18, escape(chart.categories[c]));
  }
  draw_legend(svg, 0.0, chart.groups);
  svg += "</svg>\n";
  return svg;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

}  // namespace quadmcv::plot
