#include "spatialgen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <thread>

#include "spatialgen/error.hpp"

namespace spatialgen {
namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers, contiguous chunks each.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t * chunk; i < std::min(n, (t + 1) * chunk); ++i) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

class LeafCursor {
 public:
  explicit LeafCursor(std::span<const ad::Var> leaves) : leaves_(leaves) {}

  ad::Var next() {
    if (pos_ >= leaves_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "fewer parameter leaves than model blocks");
    }
    return leaves_[pos_++];
  }
  MlpVars mlp(const Mlp& shape) {
    MlpVars out;
    for (std::size_t l = 0; l < shape.layers.size(); ++l) {
      out.weights.push_back(next());
      out.biases.push_back(next());
    }
    return out;
  }
  void finish() const {
    if (pos_ != leaves_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "more parameter leaves than model blocks");
    }
  }

 private:
  std::span<const ad::Var> leaves_;
  std::size_t pos_ = 0;
};

void add_mlp_blocks(Mlp& mlp, const std::string& prefix,
                    std::vector<std::pair<std::string, Tensor*>>& out) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    out.emplace_back(prefix + ".W" + std::to_string(l), &mlp.layers[l].weight);
    out.emplace_back(prefix + ".b" + std::to_string(l), &mlp.layers[l].bias);
  }
}

struct DomainLoss {
  double value = 0.0;
  std::vector<double> grad;
};

/// Task loss of one domain and its gradient with respect to the flat weights.
DomainLoss domain_loss(std::span<const double> w, const DomainSamples& domain,
                       const TaskModelSpec& task, double slope) {
  ad::Tape tape;
  const ad::Var wv = tape.leaf(Tensor::row({w.begin(), w.end()}));
  const ad::Var x = tape.leaf(domain.xs);
  const ad::Var pred = task_forward(wv, task, x, slope);
  const Tensor target = Tensor::column(domain.ys);
  const ad::Var loss = task.kind == TaskKind::Regression ? mse_loss(pred, target)
                                                         : bce_loss(pred, target);
  const ad::Gradients grads = tape.backward(loss);
  const auto g = grads[wv].data();
  return {loss.value().item(), {g.begin(), g.end()}};
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Signn: return "signn";
    case Mode::SignnGlobal: return "signn_g";
    case Mode::Erm: return "erm";
  }
  return "signn";
}

Mode parse_mode(const std::string& text) {
  if (text == "signn") return Mode::Signn;
  if (text == "signn_g") return Mode::SignnGlobal;
  if (text == "erm") return Mode::Erm;
  throw Error(ErrorCode::BadConfig, "unknown mode '" + text + "' (expected signn, signn_g or erm)");
}

std::string to_string(LossPooling pooling) {
  return pooling == LossPooling::DomainMean ? "domain_mean" : "per_sample";
}

LossPooling parse_pooling(const std::string& text) {
  if (text == "domain_mean") return LossPooling::DomainMean;
  if (text == "per_sample") return LossPooling::PerSample;
  throw Error(ErrorCode::BadConfig, "unknown pooling '" + text + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); };
  if (k < 1) fail("k must be >= 1");
  if (embedding_dim < 1) fail("embedding_dim must be >= 1");
  if (num_layers < 1) fail("num_layers must be >= 1");
  for (std::size_t h : hypernet_hidden) {
    if (h < 1) fail("hypernet_hidden widths must be >= 1");
  }
  for (std::size_t h : task_hidden) {
    if (h < 1) fail("task_hidden widths must be >= 1");
  }
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be > 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(reg_weight >= 0.0) || !std::isfinite(reg_weight)) fail("reg_weight must be >= 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::BadFraction, "test_fraction must lie in (0, 1)");
  }
  if (!(slope >= 0.0)) fail("slope must be >= 0");
  if (threads < 1) fail("threads must be >= 1");
}

TaskModelSpec TrainConfig::task_spec(std::size_t num_features) const {
  TaskModelSpec spec;
  spec.kind = kind;
  spec.layer_sizes.push_back(num_features);
  spec.layer_sizes.insert(spec.layer_sizes.end(), task_hidden.begin(), task_hidden.end());
  spec.layer_sizes.push_back(1);
  spec.validate();
  return spec;
}

std::vector<std::pair<std::string, Tensor*>> parameter_blocks(ModelParams& params, Mode mode) {
  std::vector<std::pair<std::string, Tensor*>> out;
  if (mode == Mode::Erm) {
    out.emplace_back("task_weights", &params.task_weights);
    return out;
  }
  out.emplace_back("Z", &params.z.z);
  if (mode == Mode::Signn) {
    for (std::size_t u = 0; u < params.theta.layers.size(); ++u) {
      auto& layer = params.theta.layers[u];
      const std::string prefix = "theta.layer" + std::to_string(u);
      add_mlp_blocks(layer.edge_mlp, prefix + ".edge", out);
      add_mlp_blocks(layer.embed_mlp, prefix + ".embed", out);
      out.emplace_back(prefix + ".alpha", &layer.alpha);
    }
  }
  add_mlp_blocks(params.hypernet, "phi", out);
  return out;
}

std::vector<ad::NamedTensor> named_parameters(const ModelParams& params, Mode mode) {
  ModelParams copy = params;
  std::vector<ad::NamedTensor> out;
  for (auto& [name, tensor] : parameter_blocks(copy, mode)) out.push_back({name, *tensor});
  return out;
}

ModelParams init_params(const TrainingProblem& problem) {
  const TrainConfig& c = problem.config;
  Rng rng(c.seed);
  ModelParams p;
  if (c.mode == Mode::Erm) {
    p.task_weights = init_task_weights(problem.task, rng);
    return p;
  }
  const std::size_t rows = c.mode == Mode::Signn ? problem.domains.size() : 1;
  std::normal_distribution<double> embed(0.0, 0.1);
  p.z.z = Tensor(rows, c.embedding_dim);
  for (double& v : p.z.z.data()) v = embed(rng);
  if (c.mode == Mode::Signn) p.theta = make_signn_params(c.embedding_dim, c.num_layers, rng);
  p.hypernet = make_hypernet(c.embedding_dim, c.hypernet_hidden, problem.task, rng);
  return p;
}

ad::Var objective(ad::Tape& /*tape*/, const TrainingProblem& problem, const ModelParams& shape,
                  std::span<const ad::Var> leaves) {
  const TrainConfig& c = problem.config;
  const std::size_t num_domains = problem.domains.size();
  for (const auto& d : problem.domains) {
    if (d.size() == 0) throw Error(ErrorCode::EmptyDomain, "a training domain has no samples");
  }

  LeafCursor cursor(leaves);
  ad::Var weights;  // one row per domain (Signn) or a single shared row
  std::optional<ad::Var> z;
  if (c.mode == Mode::Erm) {
    weights = cursor.next();
  } else {
    z = cursor.next();
    ad::Var embeddings = *z;
    if (c.mode == Mode::Signn) {
      std::vector<LayerVars> layers;
      for (const auto& layer : shape.theta.layers) {
        LayerVars v;
        v.edge_mlp = cursor.mlp(layer.edge_mlp);
        v.embed_mlp = cursor.mlp(layer.embed_mlp);
        v.alpha = cursor.next();
        layers.push_back(std::move(v));
      }
      embeddings = signn_forward(problem.graph, embeddings, layers, c.slope);
    }
    weights = decode(embeddings, cursor.mlp(shape.hypernet), c.slope);
  }
  cursor.finish();

  const Tensor& w = weights.value();
  if (c.mode == Mode::Signn && w.rows() != num_domains) {
    throw Error(ErrorCode::ShapeMismatch, "one embedding row per training domain expected");
  }
  std::vector<DomainLoss> losses(num_domains);
  parallel_for(num_domains, c.threads, [&](std::size_t s) {
    const std::size_t row = w.rows() == 1 ? 0 : s;
    losses[s] = domain_loss(w.row_view(row), problem.domains[s], problem.task, c.slope);
  });

  std::size_t total_samples = 0;
  for (const auto& d : problem.domains) total_samples += d.size();
  double value = 0.0;
  Tensor grad(w.rows(), w.cols(), 0.0);
  for (std::size_t s = 0; s < num_domains; ++s) {
    const double weight = c.pooling == LossPooling::DomainMean
                              ? 1.0
                              : static_cast<double>(problem.domains[s].size()) *
                                    static_cast<double>(num_domains) /
                                    static_cast<double>(total_samples);
    value += weight * losses[s].value;
    auto g = grad.row_view(w.rows() == 1 ? 0 : s);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += weight * losses[s].grad[j];
  }
  ad::Var total = ad::external_scalar(weights, value, std::move(grad));
  if (z) total = ad::add(total, ad::scale(ad::sum_sq(*z), c.reg_weight));
  return total;
}

TrainingProblem make_problem(const Dataset& train_set, const TrainConfig& config,
                             FeatureStats* stats_out, double* lon_scale_out) {
  config.validate();
  if (train_set.kind != config.kind) {
    throw Error(ErrorCode::BadConfig, "dataset is " + to_string(train_set.kind) +
                                          " but config asks for " + to_string(config.kind));
  }
  const std::size_t n = train_set.domains.size();
  if (n < config.k + 1) {
    throw Error(ErrorCode::TooFewLocations, std::to_string(n) + " training locations; k = " +
                                                std::to_string(config.k) + " needs at least " +
                                                std::to_string(config.k + 1));
  }
  for (const auto& d : train_set.domains) {
    if (d.size() == 0) throw Error(ErrorCode::EmptyDomain, "a training domain has no samples");
  }

  TrainingProblem problem;
  problem.config = config;
  problem.task = config.task_spec(train_set.num_features());
  const FeatureStats stats = fit_feature_stats(train_set.domains, train_set.num_features());
  const double lon_scale = config.equirectangular ? equirectangular_scale(train_set.domains) : 1.0;
  problem.domains = train_set.domains;
  std::vector<Location> locations;
  for (std::size_t i = 0; i < n; ++i) {
    auto& d = problem.domains[i];
    apply_feature_stats(d.xs, stats);
    d.location.id = i;
    d.location.coord.x *= lon_scale;
    locations.push_back(d.location);
  }
  if (config.mode == Mode::Signn) {
    const KnnGraph graph = build_knn_graph(locations, config.k);
    problem.length_scale = config.standardize_lengths ? mean_seen_edge_length(graph) : 1.0;
    problem.graph = make_graph_features(graph, problem.length_scale);
  }
  if (stats_out != nullptr) *stats_out = stats;
  if (lon_scale_out != nullptr) *lon_scale_out = lon_scale;
  return problem;
}

TrainedModel train(const Dataset& train_set, const TrainConfig& config) {
  TrainedModel model;
  TrainingProblem problem = make_problem(train_set, config, &model.feature_stats, &model.lon_scale);
  model.config = config;
  model.task = problem.task;
  for (const auto& d : train_set.domains) model.seen_locations.push_back(d.location.coord);
  model.length_scale = problem.length_scale;

  model.params = init_params(problem);
  auto blocks = parameter_blocks(model.params, config.mode);
  std::vector<Tensor*> tensors;
  for (auto& [name, t] : blocks) tensors.push_back(t);

  AdamState state;
  const AdamOptions adam = config.adam();
  model.history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (Tensor* t : tensors) leaves.push_back(tape.leaf(*t));
    double value = 0.0;
    ad::Gradients grads;
    try {
      const ad::Var loss = objective(tape, problem, model.params, leaves);
      value = loss.value().item();
      if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteResult, "objective");
      grads = tape.backward(loss);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteResult) throw;
      throw Error(ErrorCode::NonFiniteLoss,
                  "objective became non-finite at epoch " + std::to_string(epoch) +
                      (model.history.empty()
                           ? std::string()
                           : " (previous value " + format_double(model.history.back()) + ")"));
    }
    model.history.push_back(value);
    std::vector<Tensor> g;
    g.reserve(leaves.size());
    for (const auto& leaf : leaves) g.push_back(grads[leaf]);
    adam_step(tensors, g, state, adam);
  }
  return model;
}

Predictor::Predictor(const TrainedModel& model) : model_(model) {
  if (model.config.mode == Mode::Signn) {
    std::vector<Location> locs;
    for (std::size_t i = 0; i < model.seen_locations.size(); ++i) {
      locs.push_back(Location{i, model.planar(model.seen_locations[i])});
    }
    graph_ = build_knn_graph(locs, model.config.k);
  }
}

std::vector<double> Predictor::embedding_at(Vec2 lonlat) const {
  switch (model_.config.mode) {
    case Mode::Signn: {
      InterpolationOptions opts;
      opts.length_scale = model_.length_scale;
      opts.query_init = model_.config.query_init;
      opts.slope = model_.config.slope;
      return interpolate_at(model_.planar(lonlat), *graph_, model_.params.z, model_.params.theta,
                            opts);
    }
    case Mode::SignnGlobal: {
      const auto row = model_.params.z.z.row_view(0);
      return {row.begin(), row.end()};
    }
    case Mode::Erm: break;
  }
  return {};
}

std::vector<double> Predictor::task_weights_at(Vec2 lonlat) const {
  if (model_.config.mode == Mode::Erm) {
    const auto w = model_.params.task_weights.data();
    return {w.begin(), w.end()};
  }
  return decode(embedding_at(lonlat), model_.params.hypernet, model_.config.slope);
}

std::vector<double> Predictor::predict(Vec2 lonlat, const Tensor& raw_xs) const {
  if (raw_xs.cols() != model_.task.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "features have " + std::to_string(raw_xs.cols()) +
                                              " columns, model expects " +
                                              std::to_string(model_.task.input_dim()));
  }
  Tensor xs = raw_xs;
  apply_feature_stats(xs, model_.feature_stats);
  return task_forward(task_weights_at(lonlat), model_.task, xs, model_.config.slope);
}

EvalReport evaluate(const TrainedModel& model, std::span<const DomainSamples> test_domains) {
  const Predictor predictor(model);
  EvalReport report;
  report.mode = model.config.mode;
  report.metric_name = model.task.kind == TaskKind::Regression ? "mae" : "auc";
  report.predictions.resize(test_domains.size());
  parallel_for(test_domains.size(), model.config.threads, [&](std::size_t i) {
    report.predictions[i] = predictor.predict(test_domains[i].location.coord, test_domains[i].xs);
  });

  std::vector<double> all_pred, all_true;
  for (std::size_t i = 0; i < test_domains.size(); ++i) {
    const auto& d = test_domains[i];
    const auto& pred = report.predictions[i];
    DomainMetric m{d.lat(), d.lon(), d.size(), std::nullopt};
    if (model.task.kind == TaskKind::Regression) {
      m.value = mae(pred, d.ys);
    } else {
      const bool has_pos = std::find(d.ys.begin(), d.ys.end(), 1.0) != d.ys.end();
      const bool has_neg = std::find(d.ys.begin(), d.ys.end(), 0.0) != d.ys.end();
      if (has_pos && has_neg) m.value = auc(pred, d.ys);
    }
    report.per_domain.push_back(m);
    all_pred.insert(all_pred.end(), pred.begin(), pred.end());
    all_true.insert(all_true.end(), d.ys.begin(), d.ys.end());
  }
  if (all_pred.empty()) throw Error(ErrorCode::EmptyDomain, "no test samples to evaluate");
  report.overall = model.task.kind == TaskKind::Regression ? mae(all_pred, all_true)
                                                           : auc(all_pred, all_true);
  return report;
}

Split split_domains(std::size_t num_locations, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::BadFraction, "test fraction must lie in (0, 1)");
  }
  if (num_locations < 2) {
    throw Error(ErrorCode::TooFewLocations, "splitting needs at least two locations");
  }
  std::vector<std::size_t> ids(num_locations);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  const double raw = static_cast<double>(num_locations) * test_fraction;
  std::size_t n_test = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  n_test = std::clamp<std::size_t>(n_test, 1, num_locations - 1);

  Split split;
  split.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace spatialgen
