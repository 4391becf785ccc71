#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace faceqr {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal deterministic line plot. Rendering never feeds back into any CSV.
void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series);

}  // namespace faceqr
