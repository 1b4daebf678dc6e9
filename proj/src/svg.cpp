#include "driftforge/io.hpp"

#include <algorithm>
#include <sstream>

namespace driftforge {

namespace {

constexpr double kWidth = 640.0, kHeight = 400.0;
constexpr double kLeft = 64.0, kRight = 24.0, kTop = 40.0, kBottom = 48.0;

double map_x(std::size_t i, std::size_t n) {
  const double span = kWidth - kLeft - kRight;
  return kLeft + (n <= 1 ? 0.0 : span * static_cast<double>(i) / static_cast<double>(n - 1));
}

double map_y(double v, double y_min, double y_max) {
  const double span = kHeight - kTop - kBottom;
  const double f = (v - y_min) / (y_max - y_min);
  return kHeight - kBottom - span * std::clamp(f, 0.0, 1.0);
}

}  // namespace

std::string render_curve_svg(const std::string& title, const std::string& y_label,
                             const std::vector<CurveSeries>& series, double y_min, double y_max) {
  if (y_max <= y_min) y_max = y_min + 1.0;
  std::size_t n = 0;
  for (const auto& s : series) n = std::max(n, s.values.size());

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
      << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"#444\"/>\n";

  for (int tick = 0; tick <= 4; ++tick) {
    const double v = y_min + (y_max - y_min) * tick / 4.0;
    const double y = map_y(v, y_min, y_max);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << format_double(v) << "</text>\n";
  }
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">iteration</text>\n";
  svg << "<text x=\"16\" y=\"" << kHeight / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 " << kHeight / 2
      << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";

  double legend_y = kTop + 14.0;
  for (const auto& s : series) {
    if (s.values.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i)
      svg << format_double(map_x(i, n)) << "," << format_double(map_y(s.values[i], y_min, y_max)) << " ";
    svg << "\"/>\n";
    svg << "<line x1=\"" << kLeft + 10 << "\" y1=\"" << legend_y << "\" x2=\"" << kLeft + 34 << "\" y2=\"" << legend_y
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + 40 << "\" y=\"" << legend_y + 4 << "\" font-size=\"11\">" << s.label
        << "</text>\n";
    legend_y += 16.0;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace driftforge
