#pragma once

#include <optional>
#include <string>
#include <vector>

namespace safechain::harness {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // optional +/- half-width around y
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::optional<double> reference_y;  // dashed horizontal line
  double width = 640;
  double height = 400;
};

/// Self-contained SVG line chart. Output depends only on the inputs.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace safechain::harness
