#pragma once

#include <optional>
#include <span>
#include <string>

namespace spatialgen {

struct ScatterPoint {
  double x = 0.0;  // longitude
  double y = 0.0;  // latitude
  std::optional<double> value;
};

/// Standalone SVG document: one circle per point, filled on a linear colour
/// scale between the smallest and largest value, plus a labelled colour bar.
/// Points without a value are drawn hollow.
std::string render_scatter_svg(std::span<const ScatterPoint> points, const std::string& title,
                               const std::string& value_label);

}  // namespace spatialgen
