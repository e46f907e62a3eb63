#include "spatialgen/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "spatialgen/error.hpp"

namespace spatialgen {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::UnparsableNumber, "row " + std::to_string(line) + ", column '" +
                                                 column + "': cannot parse '" + text + "'");
  }
  return value;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

double logistic(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

std::size_t Dataset::num_samples() const noexcept {
  std::size_t total = 0;
  for (const auto& d : domains) total += d.size();
  return total;
}

std::vector<DomainSamples> Dataset::subset(std::span<const std::size_t> ids) const {
  std::vector<DomainSamples> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back(domains.at(ids[i]));
    out.back().location.id = i;
  }
  return out;
}

Dataset read_csv(std::istream& in, const CsvSchema& schema, TaskKind kind) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw Error(ErrorCode::EmptyFile, "no header row");
  }
  const auto header = split_fields(line);
  const std::size_t lat_idx = column_index(header, schema.lat_col);
  const std::size_t lon_idx = column_index(header, schema.lon_col);
  const std::size_t target_idx = column_index(header, schema.target_col);

  std::vector<std::size_t> feature_idx;
  Dataset ds;
  ds.kind = kind;
  ds.target_name = schema.target_col;
  if (schema.feature_cols.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == lat_idx || c == lon_idx || c == target_idx) continue;
      feature_idx.push_back(c);
      ds.feature_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.feature_cols) {
      feature_idx.push_back(column_index(header, name));
      ds.feature_names.push_back(name);
    }
  }
  const std::size_t p = feature_idx.size();

  std::map<std::pair<std::string, std::string>, std::size_t> by_coord;
  std::vector<std::vector<double>> features;  // flat per domain
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::UnparsableNumber,
                  "row " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    const double lat = parse_number(fields[lat_idx], line_no, schema.lat_col);
    const double lon = parse_number(fields[lon_idx], line_no, schema.lon_col);
    const double y = parse_number(fields[target_idx], line_no, schema.target_col);
    if (kind == TaskKind::BinaryClassification && y != 0.0 && y != 1.0) {
      throw Error(ErrorCode::NonBinaryLabel,
                  "row " + std::to_string(line_no) + ": label " + fields[target_idx] +
                      " is not 0 or 1");
    }

    const auto key = std::make_pair(fields[lat_idx], fields[lon_idx]);
    auto [it, inserted] = by_coord.try_emplace(key, ds.domains.size());
    if (inserted) {
      DomainSamples d;
      d.location = Location{ds.domains.size(), Vec2{lon, lat}};
      ds.domains.push_back(std::move(d));
      features.emplace_back();
    }
    const std::size_t dom = it->second;
    for (std::size_t f = 0; f < p; ++f) {
      features[dom].push_back(parse_number(fields[feature_idx[f]], line_no, header[feature_idx[f]]));
    }
    ds.domains[dom].ys.push_back(y);
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::EmptyFile, "no data rows");
  for (std::size_t d = 0; d < ds.domains.size(); ++d) {
    ds.domains[d].xs = Tensor(ds.domains[d].ys.size(), p, std::move(features[d]));
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema, TaskKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return read_csv(in, schema, kind);
}

PointRows read_points_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw Error(ErrorCode::EmptyFile, "no header row");
  }
  const auto header = split_fields(line);
  const std::size_t lat_idx = column_index(header, schema.lat_col);
  const std::size_t lon_idx = column_index(header, schema.lon_col);
  std::vector<std::size_t> feature_idx;
  if (schema.feature_cols.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == lat_idx || c == lon_idx || header[c] == schema.target_col) continue;
      feature_idx.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_cols) feature_idx.push_back(column_index(header, name));
  }

  PointRows rows;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::UnparsableNumber,
                  "row " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    rows.lonlat.push_back({parse_number(fields[lon_idx], line_no, schema.lon_col),
                           parse_number(fields[lat_idx], line_no, schema.lat_col)});
    for (std::size_t f : feature_idx) values.push_back(parse_number(fields[f], line_no, header[f]));
  }
  if (rows.lonlat.empty()) throw Error(ErrorCode::EmptyFile, "no data rows");
  rows.xs = Tensor(rows.lonlat.size(), feature_idx.size(), std::move(values));
  return rows;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_csv(const Dataset& dataset, std::ostream& out) {
  out << "lat,lon";
  for (const auto& name : dataset.feature_names) out << ',' << name;
  out << ',' << dataset.target_name << '\n';
  for (const auto& d : dataset.domains) {
    const std::string lat = format_double(d.lat());
    const std::string lon = format_double(d.lon());
    for (std::size_t i = 0; i < d.size(); ++i) {
      out << lat << ',' << lon;
      for (double v : d.xs.row_view(i)) out << ',' << format_double(v);
      out << ',' << format_double(d.ys[i]) << '\n';
    }
  }
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  write_csv(dataset, out);
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

FeatureStats fit_feature_stats(std::span<const DomainSamples> domains, std::size_t num_features) {
  FeatureStats stats{std::vector<double>(num_features, 0.0),
                     std::vector<double>(num_features, 0.0)};
  std::size_t n = 0;
  for (const auto& d : domains) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (std::size_t f = 0; f < num_features; ++f) stats.mean[f] += d.xs(i, f);
    }
    n += d.size();
  }
  if (n == 0) throw Error(ErrorCode::EmptyDomain, "no training samples to fit feature statistics");
  for (double& m : stats.mean) m /= static_cast<double>(n);
  for (const auto& d : domains) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (std::size_t f = 0; f < num_features; ++f) {
        const double c = d.xs(i, f) - stats.mean[f];
        stats.stddev[f] += c * c;
      }
    }
  }
  for (double& s : stats.stddev) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-8);
  return stats;
}

void apply_feature_stats(Tensor& xs, const FeatureStats& stats) {
  if (xs.cols() != stats.mean.size()) {
    throw Error(ErrorCode::ShapeMismatch, "features have " + std::to_string(xs.cols()) +
                                              " columns, statistics cover " +
                                              std::to_string(stats.mean.size()));
  }
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    for (std::size_t f = 0; f < xs.cols(); ++f) {
      xs(i, f) = (xs(i, f) - stats.mean[f]) / stats.stddev[f];
    }
  }
}

Dataset standardize(const Dataset& dataset, std::span<const std::size_t> train_ids) {
  if (train_ids.empty()) throw Error(ErrorCode::EmptyDomain, "standardize needs training domains");
  const auto train = dataset.subset(train_ids);
  Dataset out = dataset;
  out.stats = fit_feature_stats(train, dataset.num_features());
  for (auto& d : out.domains) apply_feature_stats(d.xs, *out.stats);
  return out;
}

double equirectangular_scale(std::span<const DomainSamples> domains) {
  if (domains.empty()) return 1.0;
  double lat = 0.0;
  for (const auto& d : domains) lat += d.lat();
  lat /= static_cast<double>(domains.size());
  return std::cos(lat * std::numbers::pi / 180.0);
}

std::string to_string(FieldKind kind) {
  return kind == FieldKind::Heterogeneous ? "heterogeneous" : "constant";
}

FieldKind parse_field_kind(const std::string& text) {
  if (text == "heterogeneous") return FieldKind::Heterogeneous;
  if (text == "constant") return FieldKind::Constant;
  throw Error(ErrorCode::BadConfig, "unknown field kind '" + text + "'");
}

std::vector<double> coefficient_field(Vec2 s, std::size_t p, FieldKind field) {
  using std::numbers::pi;
  static constexpr double kConstant[4] = {0.8, -0.5, 0.3, -0.6};
  std::vector<double> w(p);
  for (std::size_t j = 0; j < p; ++j) {
    if (field == FieldKind::Constant) {
      w[j] = kConstant[j % 4];
      continue;
    }
    // Features past the fourth reuse the four forms with a quarter-cycle shift.
    const double shift = 0.25 * static_cast<double>(j / 4);
    const double x = s.x + shift;
    const double y = s.y + shift;
    switch (j % 4) {
      case 0: w[j] = std::sin(2 * pi * x) * std::cos(pi * y); break;
      case 1: w[j] = std::cos(2 * pi * y); break;
      case 2: w[j] = std::cos(2 * pi * x) * std::sin(pi * y); break;
      default: w[j] = std::sin(2 * pi * (x + y)); break;
    }
  }
  return w;
}

double bias_field(Vec2 s, FieldKind field) {
  if (field == FieldKind::Constant) return 0.2;
  return std::sin(std::numbers::pi * (s.x + s.y));
}

Dataset synth_generate(const SynthOptions& o) {
  if (o.num_locations < 1) throw Error(ErrorCode::BadCount, "number of locations must be >= 1");
  if (o.samples_per_location < 1) {
    throw Error(ErrorCode::BadCount, "samples per location must be >= 1");
  }
  if (o.num_features < 2) throw Error(ErrorCode::BadCount, "number of features must be >= 2");
  if (!(o.noise_std >= 0.0) || !std::isfinite(o.noise_std)) {
    throw Error(ErrorCode::BadCount, "noise standard deviation must be finite and >= 0");
  }

  Rng rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset ds;
  ds.kind = o.kind;
  for (std::size_t f = 0; f < o.num_features; ++f) ds.feature_names.push_back("x" + std::to_string(f));

  for (std::size_t i = 0; i < o.num_locations; ++i) {
    const double x = unit(rng);
    const double y = unit(rng);
    DomainSamples d;
    d.location = Location{i, Vec2{x, y}};
    ds.domains.push_back(std::move(d));
  }
  for (auto& d : ds.domains) {
    const auto w = coefficient_field(d.location.coord, o.num_features, o.field);
    const double b = bias_field(d.location.coord, o.field);
    d.xs = Tensor(o.samples_per_location, o.num_features);
    for (std::size_t n = 0; n < o.samples_per_location; ++n) {
      double signal = 0.0;
      for (std::size_t f = 0; f < o.num_features; ++f) {
        d.xs(n, f) = normal(rng);
        signal += w[f] * d.xs(n, f);
      }
      signal += b;
      if (o.kind == TaskKind::Regression) {
        d.ys.push_back(signal + o.noise_std * normal(rng));
      } else {
        d.ys.push_back(unit(rng) < logistic(signal) ? 1.0 : 0.0);
      }
    }
  }
  return ds;
}

}  // namespace spatialgen
