#include "ltood/cli/svg_plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ltood/error.hpp"

namespace ltood::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

LinePlot plot_from_csv(const std::filesystem::path& path, const std::string& x_column) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.empty()) {
    throw std::invalid_argument(path.string() + ": empty CSV, nothing to plot");
  }
  const auto header = split(line);
  std::size_t xcol = 0;
  if (!x_column.empty()) {
    auto it = std::find(header.begin(), header.end(), x_column);
    if (it == header.end()) {
      throw std::invalid_argument(path.string() + ": no column named '" + x_column + "'");
    }
    xcol = static_cast<std::size_t>(it - header.begin());
  }
  if (header.size() < 2) {
    throw std::invalid_argument(path.string() + ": need an x column and at least one series");
  }
  LinePlot plot;
  plot.x_label = header[xcol];
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != xcol) plot.series.push_back({header[c], {}});
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    }
    std::size_t s = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto& cell = cells[c];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": column '" +
                         header[c] + "' is not a number: '" + cell + "'");
      }
      if (c == xcol) {
        plot.x.push_back(v);
      } else {
        plot.series[s++].y.push_back(v);
      }
    }
  }
  if (plot.x.empty()) {
    throw std::invalid_argument(path.string() + ": CSV has no data rows, nothing to plot");
  }
  return plot;
}

void write_plot_csv(std::ostream& os, const LinePlot& plot) {
  os << plot.x_label;
  for (const auto& s : plot.series) os << ',' << s.name;
  os << '\n';
  for (std::size_t i = 0; i < plot.x.size(); ++i) {
    os << shortest(plot.x[i]);
    for (const auto& s : plot.series) os << ',' << shortest(s.y.at(i));
    os << '\n';
  }
}

std::string render_svg(const LinePlot& plot, int width, int height) {
  if (plot.x.empty()) throw std::invalid_argument("render_svg: no points");
  for (const auto& s : plot.series) {
    if (s.y.size() != plot.x.size()) {
      throw std::invalid_argument("render_svg: series '" + s.name + "' length mismatch");
    }
  }
  const double left = 70, right = 160, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;

  double x0 = *std::min_element(plot.x.begin(), plot.x.end());
  double x1 = *std::max_element(plot.x.begin(), plot.x.end());
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -y0;
  for (const auto& s : plot.series) {
    for (double v : s.y) {
      if (std::isfinite(v)) {
        y0 = std::min(y0, v);
        y1 = std::max(y1, v);
      }
    }
  }
  if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto sx = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return top + (y1 - v) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  if (!plot.title.empty()) {
    os << "<text x=\"" << num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"15\">" << xml_escape(plot.title)
       << "</text>\n";
  }
  os << "<g stroke=\"#999\" stroke-width=\"1\" fill=\"none\">\n"
     << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\"/>\n</g>\n";

  os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0;
    const double yv = y0 + (y1 - y0) * i / 5.0;
    os << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 16)
       << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(sy(yv) + 4)
       << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
  }
  os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height - 10.0)
     << "\" text-anchor=\"middle\">" << xml_escape(plot.x_label) << "</text>\n";
  if (!plot.y_label.empty()) {
    os << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 16 " << num(top + ph / 2) << ")\">"
       << xml_escape(plot.y_label) << "</text>\n";
  }
  os << "</g>\n";

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < plot.x.size(); ++i) {
      const double v = plot.series[s].y[i];
      if (!std::isfinite(v)) continue;
      if (!first) os << ' ';
      os << num(sx(plot.x[i])) << ',' << num(sy(v));
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 14.0 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
       << num(left + pw + 32) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << num(left + pw + 38) << "\" y=\"" << num(ly)
       << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << xml_escape(plot.series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ltood::cli
