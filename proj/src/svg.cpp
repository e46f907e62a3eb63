#include "spatialgen/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace spatialgen {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 50.0;
constexpr double kBarWidth = 16.0;
constexpr double kPlotRight = kWidth - 110.0;

struct Rgb {
  double r, g, b;
};

// Sampled from a perceptually uniform dark-blue to yellow ramp.
constexpr std::array<Rgb, 5> kStops{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                                     {94, 201, 98}, {253, 231, 37}}};

std::string colour(double t) {
  t = std::clamp(t, 0.0, 1.0) * static_cast<double>(kStops.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(t), kStops.size() - 2);
  const double f = t - static_cast<double>(i);
  const Rgb& a = kStops[i];
  const Rgb& b = kStops[i + 1];
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(a.r + f * (b.r - a.r))),
                static_cast<int>(std::lround(a.g + f * (b.g - a.g))),
                static_cast<int>(std::lround(a.b + f * (b.b - a.b))));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string render_scatter_svg(std::span<const ScatterPoint> points, const std::string& title,
                               const std::string& value_label) {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  double v0 = 0.0, v1 = 1.0;
  bool any_point = false, any_value = false;
  for (const auto& p : points) {
    if (!any_point) {
      x0 = x1 = p.x;
      y0 = y1 = p.y;
      any_point = true;
    }
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
    if (p.value) {
      if (!any_value) {
        v0 = v1 = *p.value;
        any_value = true;
      }
      v0 = std::min(v0, *p.value);
      v1 = std::max(v1, *p.value);
    }
  }
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double vspan = v1 - v0 > 0.0 ? v1 - v0 : 1.0;

  auto px = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * (kPlotRight - kMargin); };
  auto py = [&](double y) {
    return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2.0 * kMargin);
  };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
    << " font-size=\"16\">" << escape(title) << "</text>\n"
    << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kPlotRight - kMargin
    << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"#888\"/>\n"
    << "<text x=\"" << (kMargin + kPlotRight) / 2 << "\" y=\"" << kHeight - 15
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">lon ["
    << label(x0) << ", " << label(x1) << "]</text>\n"
    << "<text x=\"15\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\""
    << " font-size=\"12\" transform=\"rotate(-90 15 " << kHeight / 2 << ")\">lat [" << label(y0)
    << ", " << label(y1) << "]</text>\n";

  s << "<g class=\"markers\">\n";
  for (const auto& p : points) {
    s << "<circle class=\"marker\" cx=\"" << num(px(p.x)) << "\" cy=\"" << num(py(p.y))
      << "\" r=\"5\"";
    if (p.value) {
      s << " fill=\"" << colour((*p.value - v0) / vspan) << "\" stroke=\"#333\"><title>"
        << label(p.y) << ", " << label(p.x) << ": " << label(*p.value) << "</title></circle>\n";
    } else {
      s << " fill=\"none\" stroke=\"#333\"><title>" << label(p.y) << ", " << label(p.x)
        << ": n/a</title></circle>\n";
    }
  }
  s << "</g>\n";

  const double bar_x = kPlotRight + 30.0;
  const double bar_top = kMargin;
  const double bar_h = kHeight - 2.0 * kMargin;
  s << "<defs><linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">";
  for (std::size_t i = 0; i < kStops.size(); ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(kStops.size() - 1);
    s << "<stop offset=\"" << num(t) << "\" stop-color=\"" << colour(t) << "\"/>";
  }
  s << "</linearGradient></defs>\n"
    << "<rect x=\"" << bar_x << "\" y=\"" << bar_top << "\" width=\"" << kBarWidth
    << "\" height=\"" << bar_h << "\" fill=\"url(#scale)\" stroke=\"#333\"/>\n"
    << "<text x=\"" << bar_x + kBarWidth + 4 << "\" y=\"" << bar_top + 4
    << "\" font-family=\"sans-serif\" font-size=\"11\">" << label(v1) << "</text>\n"
    << "<text x=\"" << bar_x + kBarWidth + 4 << "\" y=\"" << bar_top + bar_h
    << "\" font-family=\"sans-serif\" font-size=\"11\">" << label(v0) << "</text>\n"
    << "<text x=\"" << bar_x + kBarWidth / 2 << "\" y=\"" << bar_top - 10
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
    << escape(value_label) << "</text>\n"
    << "</svg>\n";
  return s.str();
}

}  // namespace spatialgen
