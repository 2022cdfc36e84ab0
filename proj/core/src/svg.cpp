#include "safechain/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "safechain/csv.hpp"

namespace safechain::harness {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

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

std::string fmt(double v) { return format_number(std::round(v * 100.0) / 100.0); }

}  // namespace

std::string line_chart(const std::vector<Series>& series, const ChartOptions& opt) {
  const double left = 70, right = 150, top = 40, bottom = 50;
  const double pw = opt.width - left - right;
  const double ph = opt.height - top - bottom;

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double b = i < s.band.size() && std::isfinite(s.band[i]) ? s.band[i] : 0.0;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - b);
      y1 = std::max(y1, s.y[i] + b);
    }
  }
  if (opt.reference_y) {
    y0 = std::min(y0, *opt.reference_y);
    y1 = std::max(y1, *opt.reference_y);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(opt.width) << "\" height=\""
      << fmt(opt.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(left) << "\" y=\"20\" font-size=\"14\">" << escape(opt.title) << "</text>\n";
  svg << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double fx = x0 + (x1 - x0) * k / 4.0;
    svg << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py(fy) + 4)
        << "\" text-anchor=\"end\">" << fmt(fy) << "</text>\n";
    svg << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << fmt(top + ph + 16)
        << "\" text-anchor=\"middle\">" << fmt(fx) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(opt.height - 10)
      << "\" text-anchor=\"middle\">" << escape(opt.x_label) << "</text>\n";
  svg << "<text transform=\"translate(16," << fmt(top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(opt.y_label) << "</text>\n";
  if (opt.reference_y) {
    svg << "<line x1=\"" << fmt(left) << "\" x2=\"" << fmt(left + pw) << "\" y1=\""
        << fmt(py(*opt.reference_y)) << "\" y2=\"" << fmt(py(*opt.reference_y))
        << "\" stroke=\"#000\" stroke-dasharray=\"6,4\"/>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.band.size() >= n && n > 0) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < n; ++i) svg << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] + s.band[i])) << ' ';
      for (std::size_t i = n; i-- > 0;) svg << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] - s.band[i])) << ' ';
      svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) svg << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
    }
    svg << "\"/>\n";
    const double ly = top + 14.0 + 18.0 * static_cast<double>(k);
    svg << "<line x1=\"" << fmt(left + pw + 10) << "\" x2=\"" << fmt(left + pw + 30) << "\" y1=\""
        << fmt(ly) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(left + pw + 36) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace safechain::harness
