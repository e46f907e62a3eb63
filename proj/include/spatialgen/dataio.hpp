#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spatialgen/downstream.hpp"
#include "spatialgen/spatial_graph.hpp"
#include "spatialgen/tensor.hpp"

namespace spatialgen {

/// All samples observed at one location. location.coord is (lon, lat).
struct DomainSamples {
  Location location;
  Tensor xs;               // N x p
  std::vector<double> ys;  // N

  double lat() const noexcept { return location.coord.y; }
  double lon() const noexcept { return location.coord.x; }
  std::size_t size() const noexcept { return ys.size(); }
};

/// Per-feature z-score parameters, fitted on training domains only.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  std::vector<DomainSamples> domains;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  TaskKind kind = TaskKind::Regression;
  std::optional<FeatureStats> stats;

  std::size_t num_features() const noexcept { return feature_names.size(); }
  std::size_t num_samples() const noexcept;
  /// Domains picked by index, in the given order, re-numbered from 0.
  std::vector<DomainSamples> subset(std::span<const std::size_t> ids) const;
};

struct CsvSchema {
  std::string lat_col = "lat";
  std::string lon_col = "lon";
  std::string target_col = "y";
  /// Empty means every column that is not lat, lon or target, in file order.
  std::vector<std::string> feature_cols;
};

/// Rows whose trimmed (lat, lon) text matches form one domain; domains appear
/// in order of first occurrence and rows keep file order within a domain.
Dataset read_csv(std::istream& in, const CsvSchema& schema, TaskKind kind);
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema, TaskKind kind);

/// Header `lat,lon,<features>,<target>`, numbers in shortest round-trip form.
/// Ungrouped rows for prediction: one (lon, lat) and one feature row per line,
/// file order preserved. The target column is not required.
struct PointRows {
  std::vector<Vec2> lonlat;
  Tensor xs;  // rows x p
};

PointRows read_points_csv(std::istream& in, const CsvSchema& schema);

void write_csv(const Dataset& dataset, std::ostream& out);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

FeatureStats fit_feature_stats(std::span<const DomainSamples> domains, std::size_t num_features);
void apply_feature_stats(Tensor& xs, const FeatureStats& stats);
/// Z-scores every domain with statistics from `train_ids` only (std floored at 1e-8).
Dataset standardize(const Dataset& dataset, std::span<const std::size_t> train_ids);

/// cos(mean latitude): multiplier for longitudes under an equirectangular projection.
double equirectangular_scale(std::span<const DomainSamples> domains);

enum class FieldKind { Heterogeneous, Constant };

std::string to_string(FieldKind kind);
FieldKind parse_field_kind(const std::string& text);

struct SynthOptions {
  std::size_t num_locations = 200;
  std::size_t samples_per_location = 20;
  std::size_t num_features = 4;
  double noise_std = 0.1;
  TaskKind kind = TaskKind::Regression;
  FieldKind field = FieldKind::Heterogeneous;
  std::uint64_t seed = 0;
};

/// Ground-truth coefficients w(s) for `p` features at location s in [0, 1]^2.
std::vector<double> coefficient_field(Vec2 s, std::size_t p, FieldKind field);
double bias_field(Vec2 s, FieldKind field);

/// Locations uniform on [0,1]^2 (lon = s.x, lat = s.y), standard normal
/// features, y = w(s).x + b(s) + noise, or a Bernoulli(sigmoid(.)) label.
Dataset synth_generate(const SynthOptions& options);

}  // namespace spatialgen
