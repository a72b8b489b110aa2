#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ltood::cli {

struct Series {
  std::string name;
  std::vector<double> y;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<Series> series;
};

// Numeric CSV with a header row. Column `x_column` (default: the first) is
// the abscissa; every other column becomes a series. Non-numeric columns are
// rejected with the offending line. No data rows is an invalid_argument.
LinePlot plot_from_csv(const std::filesystem::path& path, const std::string& x_column = "");

void write_plot_csv(std::ostream& os, const LinePlot& plot);
// Self-contained SVG 1.1 document.
std::string render_svg(const LinePlot& plot, int width = 720, int height = 440);

std::string xml_escape(const std::string& s);

}  // namespace ltood::cli
