#include "spatialgen/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spatialgen/checkpoint.hpp"
#include "spatialgen/dataio.hpp"
#include "spatialgen/svg.hpp"
#include "spatialgen/trainer.hpp"

namespace spatialgen {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  return text;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_extension(suffix);
  return out;
}

Json parse_document(const std::string& text, ErrorCode code, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(code, what + " is not valid JSON: " + e.what());
  }
}

Json config_as_json(const TrainConfig& config) { return Json::parse(config_to_json(config)); }

struct SchemaFlags {
  std::string lat = "lat";
  std::string lon = "lon";
  std::string target = "y";
  std::vector<std::string> features;

  void attach(CLI::App* app) {
    app->add_option("--lat-col", lat, "Latitude column")->capture_default_str();
    app->add_option("--lon-col", lon, "Longitude column")->capture_default_str();
    app->add_option("--target-col", target, "Target column")->capture_default_str();
    app->add_option("--features", features, "Feature columns (default: all other columns)")
        ->delimiter(',');
  }
  CsvSchema schema() const { return {lat, lon, target, features}; }
  Json json() const {
    return {{"lat_col", lat}, {"lon_col", lon}, {"target_col", target}, {"feature_cols", features}};
  }
};

/// Training flags, resolved as defaults < --config file < explicit flags.
class ConfigFlags {
 public:
  ConfigFlags() = default;
  ConfigFlags(const ConfigFlags&) = delete;
  ConfigFlags& operator=(const ConfigFlags&) = delete;

  void attach(CLI::App* app, bool with_mode) {
    config_opt_ = app->add_option("--config", config_path_, "JSON config (bare or checkpoint)");
    if (with_mode) {
      text(app, "--mode", "signn, signn_g or erm",
           [](TrainConfig& c, const std::string& v) { c.mode = parse_mode(v); });
    }
    text(app, "--kind", "regression or classification",
         [](TrainConfig& c, const std::string& v) { c.kind = parse_task_kind(v); });
    value(app, "-k,--k", &TrainConfig::k, "Neighbours per node");
    value(app, "--dz", &TrainConfig::embedding_dim, "Embedding dimension");
    value(app, "--layers", &TrainConfig::num_layers, "Interpolation layers");
    list(app, "--hypernet-hidden", &TrainConfig::hypernet_hidden, "Hypernetwork hidden widths");
    list(app, "--task-hidden", &TrainConfig::task_hidden, "Task model hidden widths");
    value(app, "--lr", &TrainConfig::learning_rate, "Adam learning rate");
    value(app, "--beta1", &TrainConfig::beta1, "Adam beta1");
    value(app, "--beta2", &TrainConfig::beta2, "Adam beta2");
    value(app, "--eps", &TrainConfig::eps, "Adam epsilon");
    value(app, "--epochs", &TrainConfig::epochs, "Full-batch epochs");
    value(app, "--reg", &TrainConfig::reg_weight, "Weight on ||Z||^2");
    value(app, "--seed", &TrainConfig::seed, "Seed for split and initialisation");
    value(app, "--test-fraction", &TrainConfig::test_fraction, "Held-out location fraction");
    text(app, "--pooling", "domain_mean or per_sample",
         [](TrainConfig& c, const std::string& v) { c.pooling = parse_pooling(v); });
    text(app, "--query-init", "neighbor_mean or zero",
         [](TrainConfig& c, const std::string& v) { c.query_init = parse_query_init(v); });
    value(app, "--slope", &TrainConfig::slope, "Leaky ReLU slope");
    value(app, "--threads", &TrainConfig::threads, "Worker threads (1 is bitwise reproducible)");
    CLI::Option* eq = app->add_flag("--equirectangular", scratch_.equirectangular,
                                    "Scale longitudes by cos(mean latitude)");
    appliers_.emplace_back(eq, [](TrainConfig& c, const TrainConfig&) { c.equirectangular = true; });
    CLI::Option* raw = app->add_flag("--raw-lengths", raw_lengths_,
                                     "Do not divide edge lengths by the mean edge length");
    appliers_.emplace_back(raw,
                           [](TrainConfig& c, const TrainConfig&) { c.standardize_lengths = false; });
  }

  TrainConfig resolve() const {
    TrainConfig c;
    if (config_opt_ != nullptr && config_opt_->count() > 0) c = load_config(config_path_, c);
    for (const auto& [opt, apply] : appliers_) {
      if (opt->count() > 0) apply(c, scratch_);
    }
    c.validate();
    return c;
  }

  std::string config_path() const { return config_path_; }

 private:
  using Apply = std::function<void(TrainConfig&, const TrainConfig&)>;

  template <class T>
  void value(CLI::App* app, const std::string& name, T TrainConfig::*member,
             const std::string& desc) {
    CLI::Option* opt = app->add_option(name, scratch_.*member, desc);
    appliers_.emplace_back(opt, [member](TrainConfig& c, const TrainConfig& s) {
      c.*member = s.*member;
    });
  }

  void list(CLI::App* app, const std::string& name, std::vector<std::size_t> TrainConfig::*member,
            const std::string& desc) {
    CLI::Option* opt = app->add_option(name, scratch_.*member, desc)->delimiter(',');
    appliers_.emplace_back(opt, [member](TrainConfig& c, const TrainConfig& s) {
      c.*member = s.*member;
    });
  }

  void text(CLI::App* app, const std::string& name, const std::string& desc,
            std::function<void(TrainConfig&, const std::string&)> set) {
    auto holder = std::make_unique<std::string>();
    CLI::Option* opt = app->add_option(name, *holder, desc);
    appliers_.emplace_back(opt, [set, h = holder.get()](TrainConfig& c, const TrainConfig&) {
      set(c, *h);
    });
    texts_.push_back(std::move(holder));
  }

  TrainConfig scratch_;
  bool raw_lengths_ = false;
  std::string config_path_;
  CLI::Option* config_opt_ = nullptr;
  std::vector<std::unique_ptr<std::string>> texts_;
  std::vector<std::pair<CLI::Option*, Apply>> appliers_;
};

struct LoadedData {
  Dataset dataset;
  std::string fingerprint;
};

LoadedData load_data(const std::string& path, const CsvSchema& schema, TaskKind kind) {
  const std::string bytes = read_text_file(path);
  std::istringstream in(bytes);
  return {read_csv(in, schema, kind), fnv1a_hex(bytes)};
}

std::string join_ids(const std::vector<std::size_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::string split_fingerprint(const Split& split) {
  return fnv1a_hex("train:" + join_ids(split.train) + ";test:" + join_ids(split.test));
}

Json split_json(const Split& split, std::size_t n, const TrainConfig& c,
                const std::string& data_fingerprint) {
  Json j;
  j["dataset_fingerprint"] = data_fingerprint;
  j["num_locations"] = n;
  j["seed"] = c.seed;
  j["test_fraction"] = c.test_fraction;
  j["split_fingerprint"] = split_fingerprint(split);
  j["train"] = split.train;
  j["test"] = split.test;
  return j;
}

Dataset with_domains(const Dataset& base, std::vector<DomainSamples> domains) {
  Dataset out;
  out.domains = std::move(domains);
  out.feature_names = base.feature_names;
  out.target_name = base.target_name;
  out.kind = base.kind;
  return out;
}

Json manifest_json(const std::string& command, const std::vector<std::string>& args,
                   std::uint64_t seed) {
  Json j;
  j["command"] = command;
  j["argv"] = args;
  j["version"] = std::string(kVersion);
  j["seed"] = seed;
  j["timestamp"] = utc_timestamp();
  return j;
}

Json report_json(const EvalReport& report) {
  Json j;
  j["mode"] = to_string(report.mode);
  j["metric_name"] = report.metric_name;
  j["overall"] = report.overall;
  Json rows = Json::array();
  for (const auto& d : report.per_domain) {
    Json row;
    row["lat"] = d.lat;
    row["lon"] = d.lon;
    row["n"] = d.n;
    row["value"] = d.value ? Json(*d.value) : Json(nullptr);
    rows.push_back(std::move(row));
  }
  j["per_domain"] = std::move(rows);
  return j;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SynthOptions opts;
  std::string kind = "regression";
  std::string field = "heterogeneous";
  std::string out;
  std::string manifest;
};

void attach_synth(CLI::App* cmd, SynthArgs& a) {
  cmd->add_option("--locations", a.opts.num_locations, "Number of locations")->capture_default_str();
  cmd->add_option("--samples", a.opts.samples_per_location, "Samples per location")
      ->capture_default_str();
  cmd->add_option("--features", a.opts.num_features, "Number of features")->capture_default_str();
  cmd->add_option("--noise", a.opts.noise_std, "Noise standard deviation")->capture_default_str();
  cmd->add_option("--seed", a.opts.seed, "Generator seed")->capture_default_str();
  cmd->add_option("--kind", a.kind, "regression or classification")->capture_default_str();
  cmd->add_option("--field", a.field, "heterogeneous or constant")->capture_default_str();
  cmd->add_option("--out", a.out, "Output CSV")->required();
  cmd->add_option("--manifest", a.manifest, "Manifest path (default: <out>.manifest.json)");
}

int run_synth(SynthArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  auto positive = [](std::size_t v, const char* flag) {
    if (v < 1) throw Error(ErrorCode::BadCount, std::string(flag) + " must be >= 1");
  };
  positive(a.opts.num_locations, "--locations");
  positive(a.opts.samples_per_location, "--samples");
  positive(a.opts.num_features, "--features");
  if (!(a.opts.noise_std >= 0.0)) throw Error(ErrorCode::BadCount, "--noise must be >= 0");
  a.opts.kind = parse_task_kind(a.kind);
  a.opts.field = parse_field_kind(a.field);

  const Dataset ds = synth_generate(a.opts);
  std::ostringstream csv;
  write_csv(ds, csv);
  const std::string bytes = csv.str();
  write_text_file(a.out, bytes);

  Json m = manifest_json("synth", args, a.opts.seed);
  m["config"] = {{"locations", a.opts.num_locations},
                 {"samples", a.opts.samples_per_location},
                 {"features", a.opts.num_features},
                 {"noise", a.opts.noise_std},
                 {"seed", a.opts.seed},
                 {"kind", to_string(a.opts.kind)},
                 {"field", to_string(a.opts.field)}};
  m["dataset_fingerprint"] = fnv1a_hex(bytes);
  m["outputs"] = {{"data", a.out}};
  write_text_file(a.manifest.empty() ? sibling(a.out, ".manifest.json") : fs::path(a.manifest),
                  m.dump(2) + "\n");
  out << "wrote " << ds.num_samples() << " rows at " << ds.domains.size() << " locations to "
      << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  SchemaFlags schema;
  ConfigFlags config;
  std::string out;
  std::string history;
  std::string split;
  std::string manifest;
};

void attach_train(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--data", a.data, "Input CSV")->required();
  a.schema.attach(cmd);
  a.config.attach(cmd, true);
  cmd->add_option("--out", a.out, "Checkpoint path")->required();
  cmd->add_option("--history", a.history, "History CSV (default: <out>.history.csv)");
  cmd->add_option("--split", a.split, "Split file (default: <out>.split.json)");
  cmd->add_option("--manifest", a.manifest, "Manifest path (default: <out>.manifest.json)");
}

int run_train(TrainArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const TrainConfig config = a.config.resolve();
  const LoadedData data = load_data(a.data, a.schema.schema(), config.kind);
  const std::size_t n = data.dataset.domains.size();
  const Split split = split_domains(n, config.test_fraction, config.seed);

  const fs::path history = a.history.empty() ? sibling(a.out, ".history.csv") : fs::path(a.history);
  const fs::path split_path = a.split.empty() ? sibling(a.out, ".split.json") : fs::path(a.split);
  const fs::path manifest_path =
      a.manifest.empty() ? sibling(a.out, ".manifest.json") : fs::path(a.manifest);

  Json m = manifest_json("train", args, config.seed);
  m["config"] = config_as_json(config);
  m["inputs"] = {{"data", a.data}, {"schema", a.schema.json()}};
  m["dataset_fingerprint"] = data.fingerprint;
  m["split_fingerprint"] = split_fingerprint(split);
  m["outputs"] = {{"checkpoint", a.out},
                  {"history", history.string()},
                  {"split", split_path.string()}};
  write_text_file(manifest_path, m.dump(2) + "\n");
  write_text_file(split_path, split_json(split, n, config, data.fingerprint).dump(2) + "\n");

  const Dataset train_set = with_domains(data.dataset, data.dataset.subset(split.train));
  const TrainedModel model = train(train_set, config);
  save_checkpoint(model, a.out);

  std::string csv = "epoch,objective\n";
  for (std::size_t e = 0; e < model.history.size(); ++e) {
    csv += std::to_string(e) + "," + format_double(model.history[e]) + "\n";
  }
  write_text_file(history, csv);

  out << "trained " << to_string(config.mode) << " on " << split.train.size() << " locations ("
      << train_set.num_samples() << " samples), " << config.epochs << " epochs; objective "
      << format_double(model.history.front()) << " -> " << format_double(model.history.back())
      << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  SchemaFlags schema;
  std::string split;
  std::string out;
  std::string plot;
  std::string predictions;
};

void attach_eval(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint from train")->required();
  cmd->add_option("--data", a.data, "CSV with test locations")->required();
  a.schema.attach(cmd);
  cmd->add_option("--split", a.split, "Split file; evaluates its test locations only");
  cmd->add_option("--out", a.out, "Report path (default: stdout)");
  cmd->add_option("--plot", a.plot, "SVG scatter of per-location metric");
  cmd->add_option("--predictions", a.predictions, "CSV of per-sample predictions");
}

std::vector<std::size_t> read_test_ids(const std::string& path, const LoadedData& data) {
  const Json j = parse_document(read_text_file(path), ErrorCode::BadConfig, "split file");
  try {
    if (j.at("dataset_fingerprint").get<std::string>() != data.fingerprint) {
      throw Error(ErrorCode::BadConfig, "split file was made for a different dataset");
    }
    auto ids = j.at("test").get<std::vector<std::size_t>>();
    for (std::size_t id : ids) {
      if (id >= data.dataset.domains.size()) {
        throw Error(ErrorCode::BadConfig, "split file names location " + std::to_string(id) +
                                              " beyond the dataset");
      }
    }
    return ids;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("split file: ") + e.what());
  }
}

int run_eval(EvalArgs& a, std::ostream& out) {
  const TrainedModel model = load_checkpoint(a.checkpoint);
  const LoadedData data = load_data(a.data, a.schema.schema(), model.task.kind);
  std::vector<DomainSamples> test;
  if (a.split.empty()) {
    test = data.dataset.domains;
  } else {
    test = data.dataset.subset(read_test_ids(a.split, data));
  }
  if (data.dataset.num_features() != model.task.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch,
                "data has " + std::to_string(data.dataset.num_features()) +
                    " feature columns, model expects " + std::to_string(model.task.input_dim()));
  }
  const EvalReport report = evaluate(model, test);
  emit(a.out, report_json(report).dump(2) + "\n", out);

  if (!a.predictions.empty()) {
    std::string csv = "lat,lon,prediction,target\n";
    for (std::size_t d = 0; d < test.size(); ++d) {
      const std::string lat = format_double(test[d].lat());
      const std::string lon = format_double(test[d].lon());
      for (std::size_t i = 0; i < test[d].size(); ++i) {
        csv += lat + "," + lon + "," + format_double(report.predictions[d][i]) + "," +
               format_double(test[d].ys[i]) + "\n";
      }
    }
    write_text_file(a.predictions, csv);
  }
  if (!a.plot.empty()) {
    std::vector<ScatterPoint> points;
    for (const auto& d : report.per_domain) points.push_back({d.lon, d.lat, d.value});
    write_text_file(a.plot, render_scatter_svg(points,
                                               to_string(report.mode) + " per-location " +
                                                   report.metric_name,
                                               report.metric_name));
  }
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint;
  double lat = 0.0;
  double lon = 0.0;
  std::vector<double> x;
  std::string input;
  SchemaFlags schema;
  std::string out;
  CLI::Option* lat_opt = nullptr;
  CLI::Option* lon_opt = nullptr;
  CLI::Option* x_opt = nullptr;
};

void attach_predict(CLI::App* cmd, PredictArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint from train")->required();
  a.lat_opt = cmd->add_option("--lat", a.lat, "Query latitude");
  a.lon_opt = cmd->add_option("--lon", a.lon, "Query longitude");
  a.x_opt = cmd->add_option("--x", a.x, "Comma-separated raw feature values")->delimiter(',');
  cmd->add_option("--input", a.input, "CSV of query rows (lat, lon, features)");
  a.schema.attach(cmd);
  cmd->add_option("--out", a.out, "Output path (default: stdout)");
}

int run_predict(PredictArgs& a, std::ostream& out) {
  const TrainedModel model = load_checkpoint(a.checkpoint);
  const Predictor predictor(model);
  std::string text;
  const bool single = a.lat_opt->count() + a.lon_opt->count() + a.x_opt->count() > 0;
  if (single == !a.input.empty()) {
    throw Error(ErrorCode::BadConfig, "give either --lat, --lon and --x, or --input");
  }
  if (single) {
    if (a.lat_opt->count() == 0 || a.lon_opt->count() == 0 || a.x_opt->count() == 0) {
      throw Error(ErrorCode::BadConfig, "--lat, --lon and --x are all required");
    }
    const Tensor xs(1, a.x.size(), a.x);
    text = format_double(predictor.predict({a.lon, a.lat}, xs).front()) + "\n";
  } else {
    const std::string bytes = read_text_file(a.input);
    std::istringstream in(bytes);
    const PointRows rows = read_points_csv(in, a.schema.schema());
    for (std::size_t i = 0; i < rows.lonlat.size(); ++i) {
      const auto r = rows.xs.row_view(i);
      const Tensor xs(1, r.size(), std::vector<double>(r.begin(), r.end()));
      text += format_double(predictor.predict(rows.lonlat[i], xs).front()) + "\n";
    }
  }
  emit(a.out, text, out);
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string data;
  SchemaFlags schema;
  ConfigFlags config;
  std::string out;
  std::string manifest;
};

void attach_bench(CLI::App* cmd, BenchArgs& a) {
  cmd->add_option("--data", a.data, "Input CSV")->required();
  a.schema.attach(cmd);
  a.config.attach(cmd, false);
  cmd->add_option("--out", a.out, "JSON report path");
  cmd->add_option("--manifest", a.manifest, "Manifest path");
}

int run_bench(BenchArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const TrainConfig base = a.config.resolve();
  const LoadedData data = load_data(a.data, a.schema.schema(), base.kind);
  const std::size_t n = data.dataset.domains.size();
  const Split split = split_domains(n, base.test_fraction, base.seed);
  const std::string split_fp = split_fingerprint(split);

  if (!a.manifest.empty()) {
    Json m = manifest_json("bench", args, base.seed);
    m["config"] = config_as_json(base);
    m["inputs"] = {{"data", a.data}, {"schema", a.schema.json()}};
    m["dataset_fingerprint"] = data.fingerprint;
    m["split_fingerprint"] = split_fp;
    write_text_file(a.manifest, m.dump(2) + "\n");
  }

  const Dataset train_set = with_domains(data.dataset, data.dataset.subset(split.train));
  const std::vector<DomainSamples> test = data.dataset.subset(split.test);

  Json report;
  report["dataset_fingerprint"] = data.fingerprint;
  report["split_fingerprint"] = split_fp;
  report["train_ids"] = split.train;
  report["test_ids"] = split.test;
  Json rows = Json::array();
  std::string metric;
  std::ostringstream table;
  for (Mode mode : {Mode::Signn, Mode::SignnGlobal, Mode::Erm}) {
    TrainConfig c = base;
    c.mode = mode;
    const TrainedModel model = train(train_set, c);
    const EvalReport r = evaluate(model, test);
    metric = r.metric_name;
    Json row;
    row["mode"] = to_string(mode);
    row["metric_name"] = r.metric_name;
    row["overall"] = r.overall;
    row["final_objective"] = model.history.back();
    row["split_fingerprint"] = split_fp;
    rows.push_back(std::move(row));
    char line[96];
    std::snprintf(line, sizeof line, "%-8s %-4s %.6f\n", to_string(mode).c_str(),
                  r.metric_name.c_str(), r.overall);
    table << line;
  }
  report["metric_name"] = metric;
  report["rows"] = std::move(rows);

  out << "split " << split_fp << " (" << split.train.size() << " train / " << split.test.size()
      << " test locations)\n"
      << table.str();
  if (!a.out.empty()) write_text_file(a.out, report.dump(2) + "\n");
  return 0;
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFinite:
    case ErrorCode::NonFiniteResult:
    case ErrorCode::NonFiniteLoss:
      return 3;
    case ErrorCode::Io:
      return 4;
    default:
      return 2;
  }
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial domain generalization: train location-conditioned models and "
               "predict at unseen locations",
               "spatialgen"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SynthArgs synth_args;
  TrainArgs train_args;
  EvalArgs eval_args;
  PredictArgs predict_args;
  BenchArgs bench_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic benchmark CSV");
  CLI::App* train_cmd = app.add_subcommand("train", "Train on a leave-locations-out split");
  CLI::App* eval = app.add_subcommand("eval", "Score a checkpoint on test locations");
  CLI::App* predict = app.add_subcommand("predict", "Predict at arbitrary coordinates");
  CLI::App* bench = app.add_subcommand("bench", "Compare signn, signn_g and erm on one split");
  attach_synth(synth, synth_args);
  attach_train(train_cmd, train_args);
  attach_eval(eval, eval_args);
  attach_predict(predict, predict_args);
  attach_bench(bench, bench_args);

  try {
    std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(reversed.begin(), reversed.end());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "usage_error: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args, args, out);
    if (train_cmd->parsed()) return run_train(train_args, args, out);
    if (eval->parsed()) return run_eval(eval_args, out);
    if (predict->parsed()) return run_predict(predict_args, out);
    if (bench->parsed()) return run_bench(bench_args, args, out);
  } catch (const Error& e) {
    err << error_code_name(e.code()) << ": " << one_line(e.what()) << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal_error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace spatialgen
