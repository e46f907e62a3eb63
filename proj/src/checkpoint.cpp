#include "spatialgen/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "spatialgen/error.hpp"

namespace spatialgen {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::BadCheckpoint, msg); }

Json tensor_json(const Tensor& t) {
  Json j;
  j["shape"] = {t.rows(), t.cols()};
  j["data"] = std::vector<double>(t.data().begin(), t.data().end());
  return j;
}

Json vector_json(std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); }

Json mlp_json(const Mlp& mlp) {
  Json layers = Json::array();
  for (const Dense& d : mlp.layers) {
    Json layer;
    layer["W"] = tensor_json(d.weight);
    layer["b"] = tensor_json(d.bias);
    layers.push_back(std::move(layer));
  }
  return layers;
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where + ": missing field '" + key + "'");
  return j.at(key);
}

std::vector<double> read_numbers(const Json& j, const std::string& where) {
  if (!j.is_array()) bad(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) bad(where + ": non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

Tensor read_tensor(const Json& j, const std::string& where) {
  const Json& shape = field(j, "shape", where);
  if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_unsigned() ||
      !shape[1].is_number_unsigned()) {
    bad(where + ": shape must be [rows, cols]");
  }
  const auto rows = shape[0].get<std::size_t>();
  const auto cols = shape[1].get<std::size_t>();
  std::vector<double> data = read_numbers(field(j, "data", where), where + ".data");
  if (data.size() != rows * cols) {
    bad(where + ": " + std::to_string(data.size()) + " values for shape [" +
        std::to_string(rows) + ", " + std::to_string(cols) + "]");
  }
  return Tensor(rows, cols, std::move(data));
}

void expect_shape(const Tensor& got, const Tensor& want, const std::string& where) {
  if (got.rows() != want.rows() || got.cols() != want.cols()) {
    bad(where + ": shape " + got.shape_string() + ", config implies " + want.shape_string());
  }
}

Mlp read_mlp(const Json& j, const Mlp& reference, const std::string& where) {
  if (!j.is_array() || j.size() != reference.layers.size()) {
    bad(where + ": expected " + std::to_string(reference.layers.size()) + " layers");
  }
  Mlp mlp;
  for (std::size_t l = 0; l < j.size(); ++l) {
    const std::string name = where + "[" + std::to_string(l) + "]";
    Dense d{read_tensor(field(j[l], "W", name), name + ".W"),
            read_tensor(field(j[l], "b", name), name + ".b")};
    expect_shape(d.weight, reference.layers[l].weight, name + ".W");
    expect_shape(d.bias, reference.layers[l].bias, name + ".b");
    mlp.layers.push_back(std::move(d));
  }
  return mlp;
}

Json config_json(const TrainConfig& c) {
  Json j;
  j["mode"] = to_string(c.mode);
  j["kind"] = to_string(c.kind);
  j["k"] = c.k;
  j["embedding_dim"] = c.embedding_dim;
  j["num_layers"] = c.num_layers;
  j["hypernet_hidden"] = c.hypernet_hidden;
  j["task_hidden"] = c.task_hidden;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["epochs"] = c.epochs;
  j["reg_weight"] = c.reg_weight;
  j["seed"] = c.seed;
  j["test_fraction"] = c.test_fraction;
  j["pooling"] = to_string(c.pooling);
  j["standardize_lengths"] = c.standardize_lengths;
  j["query_init"] = to_string(c.query_init);
  j["equirectangular"] = c.equirectangular;
  j["slope"] = c.slope;
  j["threads"] = c.threads;
  return j;
}

void config_error(const std::string& key, const char* expected) {
  throw Error(ErrorCode::BadConfig, "config field '" + key + "' must be " + expected);
}

std::size_t as_count(const Json& v, const std::string& key) {
  if (!v.is_number_unsigned()) config_error(key, "a non-negative integer");
  return v.get<std::size_t>();
}

double as_real(const Json& v, const std::string& key) {
  if (!v.is_number()) config_error(key, "a number");
  return v.get<double>();
}

std::string as_text(const Json& v, const std::string& key) {
  if (!v.is_string()) config_error(key, "a string");
  return v.get<std::string>();
}

bool as_flag(const Json& v, const std::string& key) {
  if (!v.is_boolean()) config_error(key, "true or false");
  return v.get<bool>();
}

std::vector<std::size_t> as_widths(const Json& v, const std::string& key) {
  if (!v.is_array()) config_error(key, "an array of integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(as_count(e, key));
  return out;
}

TrainConfig overlay_config(const Json& j, TrainConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "mode") c.mode = parse_mode(as_text(v, key));
    else if (key == "kind") c.kind = parse_task_kind(as_text(v, key));
    else if (key == "k") c.k = as_count(v, key);
    else if (key == "embedding_dim") c.embedding_dim = as_count(v, key);
    else if (key == "num_layers") c.num_layers = as_count(v, key);
    else if (key == "hypernet_hidden") c.hypernet_hidden = as_widths(v, key);
    else if (key == "task_hidden") c.task_hidden = as_widths(v, key);
    else if (key == "learning_rate") c.learning_rate = as_real(v, key);
    else if (key == "beta1") c.beta1 = as_real(v, key);
    else if (key == "beta2") c.beta2 = as_real(v, key);
    else if (key == "eps") c.eps = as_real(v, key);
    else if (key == "epochs") c.epochs = as_count(v, key);
    else if (key == "reg_weight") c.reg_weight = as_real(v, key);
    else if (key == "seed") c.seed = as_count(v, key);
    else if (key == "test_fraction") c.test_fraction = as_real(v, key);
    else if (key == "pooling") c.pooling = parse_pooling(as_text(v, key));
    else if (key == "standardize_lengths") c.standardize_lengths = as_flag(v, key);
    else if (key == "query_init") c.query_init = parse_query_init(as_text(v, key));
    else if (key == "equirectangular") c.equirectangular = as_flag(v, key);
    else if (key == "slope") c.slope = as_real(v, key);
    else if (key == "threads") c.threads = as_count(v, key);
    else throw Error(ErrorCode::BadConfig, "unknown config field '" + key + "'");
  }
  return c;
}

Json parse_json(std::string_view text, ErrorCode code) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(code, std::string("malformed JSON: ") + e.what());
  }
}

TrainedModel read_checkpoint(const Json& j) {
  const std::string top = "checkpoint";
  const Json& version = field(j, "format_version", top);
  if (!version.is_number_integer() || version.get<int>() != kCheckpointFormatVersion) {
    bad("unsupported format_version (expected " + std::to_string(kCheckpointFormatVersion) + ")");
  }

  TrainedModel m;
  try {
    m.config = overlay_config(field(j, "config", top), TrainConfig{});
    m.config.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BadCheckpoint) throw;
    bad(std::string("config: ") + e.what());
  }
  const TrainConfig& c = m.config;

  const Json& std_block = field(j, "standardization", top);
  m.feature_stats.mean = read_numbers(field(std_block, "feature_mean", "standardization"),
                                      "standardization.feature_mean");
  m.feature_stats.stddev = read_numbers(field(std_block, "feature_std", "standardization"),
                                        "standardization.feature_std");
  if (m.feature_stats.mean.size() != m.feature_stats.stddev.size()) {
    bad("standardization: feature_mean and feature_std lengths differ");
  }
  for (double s : m.feature_stats.stddev) {
    if (!(s > 0.0)) bad("standardization: feature_std entries must be positive");
  }
  const Json& ls = field(std_block, "length_scale", "standardization");
  const Json& lon = field(std_block, "lon_scale", "standardization");
  if (!ls.is_number() || !lon.is_number()) bad("standardization: scales must be numbers");
  m.length_scale = ls.get<double>();
  m.lon_scale = lon.get<double>();
  if (!(m.length_scale > 0.0) || !(m.lon_scale > 0.0)) {
    bad("standardization: scales must be positive");
  }

  const std::size_t p = m.feature_stats.mean.size();
  if (p == 0) bad("standardization: no features");
  m.task = c.task_spec(p);
  const Json& task = field(j, "task", top);
  try {
    const TaskKind kind = parse_task_kind(field(task, "kind", "task").get<std::string>());
    const auto sizes = field(task, "layer_sizes", "task").get<std::vector<std::size_t>>();
    if (kind != m.task.kind || sizes != m.task.layer_sizes) {
      bad("task: spec does not match config and feature count");
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("task: ") + e.what());
  }

  const Tensor seen = read_tensor(field(j, "seen_locations", top), "seen_locations");
  if (seen.cols() != 2 || seen.rows() == 0) bad("seen_locations: expected n x 2 (lon, lat)");
  for (std::size_t i = 0; i < seen.rows(); ++i) m.seen_locations.push_back({seen(i, 0), seen(i, 1)});
  const std::size_t n = seen.rows();

  const bool has_z = c.mode != Mode::Erm;
  const bool has_theta = c.mode == Mode::Signn;
  if (j.contains("Z") != has_z) bad(std::string("Z block ") + (has_z ? "missing" : "unexpected") +
                                    " for mode " + to_string(c.mode));
  if (j.contains("theta") != has_theta) {
    bad(std::string("theta block ") + (has_theta ? "missing" : "unexpected") + " for mode " +
        to_string(c.mode));
  }
  if (c.mode == Mode::Signn && n < c.k + 1) bad("seen_locations: fewer than k + 1 locations");

  Rng scratch(0);
  const Json& phi = field(j, "phi", top);
  if (has_z) {
    m.params.z.z = read_tensor(j.at("Z"), "Z");
    expect_shape(m.params.z.z, Tensor(c.mode == Mode::Signn ? n : 1, c.embedding_dim), "Z");
  }
  if (has_theta) {
    const SignnParams ref = make_signn_params(c.embedding_dim, c.num_layers, scratch);
    const Json& layers = field(j.at("theta"), "layers", "theta");
    if (!layers.is_array() || layers.size() != ref.layers.size()) {
      bad("theta: expected " + std::to_string(ref.layers.size()) + " layers");
    }
    for (std::size_t u = 0; u < layers.size(); ++u) {
      const std::string name = "theta.layers[" + std::to_string(u) + "]";
      LayerParams lp;
      lp.edge_mlp = read_mlp(field(layers[u], "edge_mlp", name), ref.layers[u].edge_mlp,
                             name + ".edge_mlp");
      lp.embed_mlp = read_mlp(field(layers[u], "embed_mlp", name), ref.layers[u].embed_mlp,
                              name + ".embed_mlp");
      lp.alpha = read_tensor(field(layers[u], "alpha", name), name + ".alpha");
      expect_shape(lp.alpha, ref.layers[u].alpha, name + ".alpha");
      m.params.theta.layers.push_back(std::move(lp));
    }
  }
  if (c.mode == Mode::Erm) {
    m.params.task_weights = read_tensor(field(phi, "task_weights", "phi"), "phi.task_weights");
    expect_shape(m.params.task_weights, Tensor(1, param_count(m.task)), "phi.task_weights");
  } else {
    const Mlp ref = make_hypernet(c.embedding_dim, c.hypernet_hidden, m.task, scratch);
    m.params.hypernet = read_mlp(field(phi, "hypernet", "phi"), ref, "phi.hypernet");
  }

  m.history = read_numbers(field(j, "history", top), "history");
  if (m.history.size() != c.epochs) {
    bad("history has " + std::to_string(m.history.size()) + " entries for " +
        std::to_string(c.epochs) + " epochs");
  }
  return m;
}

}  // namespace

std::string to_string(QueryInit init) {
  return init == QueryInit::NeighborMean ? "neighbor_mean" : "zero";
}

QueryInit parse_query_init(const std::string& text) {
  if (text == "neighbor_mean") return QueryInit::NeighborMean;
  if (text == "zero") return QueryInit::Zero;
  throw Error(ErrorCode::BadConfig, "unknown query_init '" + text + "'");
}

std::string config_to_json(const TrainConfig& config) { return config_json(config).dump(2); }

TrainConfig config_from_json(std::string_view text, const TrainConfig& base) {
  const Json j = parse_json(text, ErrorCode::BadConfig);
  if (j.is_object() && j.contains("config") && j.at("config").is_object()) {
    return overlay_config(j.at("config"), base);
  }
  return overlay_config(j, base);
}

TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
  return config_from_json(read_text_file(path), base);
}

std::string checkpoint_to_json(const TrainedModel& model) {
  const TrainConfig& c = model.config;
  Json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = config_json(c);
  j["task"] = {{"kind", to_string(model.task.kind)}, {"layer_sizes", model.task.layer_sizes}};
  Tensor seen(model.seen_locations.size(), 2);
  for (std::size_t i = 0; i < model.seen_locations.size(); ++i) {
    seen(i, 0) = model.seen_locations[i].x;
    seen(i, 1) = model.seen_locations[i].y;
  }
  j["seen_locations"] = tensor_json(seen);
  j["standardization"] = {{"feature_mean", vector_json(model.feature_stats.mean)},
                          {"feature_std", vector_json(model.feature_stats.stddev)},
                          {"length_scale", model.length_scale},
                          {"lon_scale", model.lon_scale}};
  if (c.mode != Mode::Erm) j["Z"] = tensor_json(model.params.z.z);
  if (c.mode == Mode::Signn) {
    Json layers = Json::array();
    for (const auto& lp : model.params.theta.layers) {
      Json layer;
      layer["edge_mlp"] = mlp_json(lp.edge_mlp);
      layer["embed_mlp"] = mlp_json(lp.embed_mlp);
      layer["alpha"] = tensor_json(lp.alpha);
      layers.push_back(std::move(layer));
    }
    j["theta"] = {{"layers", std::move(layers)}};
  }
  if (c.mode == Mode::Erm) {
    j["phi"] = {{"task_weights", tensor_json(model.params.task_weights)}};
  } else {
    j["phi"] = {{"hypernet", mlp_json(model.params.hypernet)}};
  }
  j["history"] = model.history;
  try {
    return j.dump(2) + "\n";
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("cannot serialise model: ") + e.what());
  }
}

TrainedModel checkpoint_from_json(std::string_view text) {
  return read_checkpoint(parse_json(text, ErrorCode::BadCheckpoint));
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_to_json(model));
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "failed reading '" + path.string() + "'");
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

}  // namespace spatialgen
