#include "core/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "core/common.hpp"

namespace faceqr {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 24;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 56;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
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

}  // namespace

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series) {
  require(!series.empty(), ErrorCode::invalid_argument, "plot needs at least one series");
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  bool first = true;
  for (const PlotSeries& s : series) {
    require(s.x.size() == s.y.size(), ErrorCode::invalid_argument,
            "plot series x/y lengths differ: " + s.label);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_min = x_max = s.x[i];
        y_min = y_max = s.y[i];
        first = false;
      }
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;
  y_max += (y_max - y_min) * 0.05;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto sx = [&](double x) { return kMarginLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) {
    return kMarginTop + plot_h - (y - y_min) / (y_max - y_min) * plot_h;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) +
         "\" height=\"" + std::to_string(kHeight) + "\" font-family=\"sans-serif\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kWidth / 2.0) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
         escape_xml(title) + "</text>\n";

  // Axes and ticks.
  svg += "<rect x=\"" + num(kMarginLeft) + "\" y=\"" + num(kMarginTop) + "\" width=\"" +
         num(plot_w) + "\" height=\"" + num(plot_h) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double fx = x_min + (x_max - x_min) * i / 5.0;
    double fy = y_min + (y_max - y_min) * i / 5.0;
    svg += "<line x1=\"" + num(sx(fx)) + "\" y1=\"" + num(kMarginTop + plot_h) + "\" x2=\"" +
           num(sx(fx)) + "\" y2=\"" + num(kMarginTop + plot_h + 5) +
           "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + num(sx(fx)) + "\" y=\"" + num(kMarginTop + plot_h + 20) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + tick(fx) + "</text>\n";
    svg += "<line x1=\"" + num(kMarginLeft - 5) + "\" y1=\"" + num(sy(fy)) + "\" x2=\"" +
           num(kMarginLeft) + "\" y2=\"" + num(sy(fy)) + "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + num(kMarginLeft - 9) + "\" y=\"" + num(sy(fy) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + tick(fy) + "</text>\n";
  }
  svg += "<text x=\"" + num(kMarginLeft + plot_w / 2) + "\" y=\"" + num(kHeight - 14) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + escape_xml(x_label) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + num(kMarginTop + plot_h / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
         num(kMarginTop + plot_h / 2) + ")\">" + escape_xml(y_label) + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
    if (!s.x.empty()) {
      std::string points;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (i) points += ' ';
        points += num(sx(s.x[i])) + "," + num(sy(s.y[i]));
      }
      svg += std::string("<polyline fill=\"none\" stroke=\"") + color +
             "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    }
    double ly = kMarginTop + 14 + 18.0 * static_cast<double>(si);
    double lx = kMarginLeft + plot_w - 150;
    svg += std::string("<line x1=\"") + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
           num(lx + 24) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(lx + 30) + "\" y=\"" + num(ly) + "\" font-size=\"12\">" +
           escape_xml(s.label) + "</text>\n";
  }
  svg += "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  require(f.good(), ErrorCode::io, "cannot write plot: " + path.string());
  f << svg;
  f.flush();
  require(f.good(), ErrorCode::io, "failed writing plot: " + path.string());
}

}  // namespace faceqr
