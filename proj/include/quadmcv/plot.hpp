#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace quadmcv::plot {

/// Numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column by header name; ConfigError if absent.
  std::vector<double> column(const std::string& name) const;
};

/// IoError if unreadable, ConfigError (naming the line) on a malformed row.
CsvTable read_csv(const std::filesystem::path& path);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
};

/// Grouped bars: values[g][c] is group g (legend entry) at category c.
struct BarChart {
  std::string title;
  std::string ylabel;
  std::vector<std::string> categories;
  std::vector<std::string> groups;
  std::vector<std::vector<double>> values;
};

std::string render_svg(const LineChart& chart);
std::string render_svg(const BarChart& chart);

/// Stacks charts vertically in one SVG document.
std::string render_svg(const std::vector<LineChart>& panels);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace quadmcv::plot
