#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spatialgen/dataio.hpp"
#include "spatialgen/downstream.hpp"
#include "spatialgen/finite_diff.hpp"
#include "spatialgen/mlp.hpp"
#include "spatialgen/optimizer.hpp"
#include "spatialgen/signn.hpp"
#include "spatialgen/spatial_graph.hpp"
#include "spatialgen/tape.hpp"

namespace spatialgen {

enum class Mode {
  Signn,        // interpolated embedding per location
  SignnGlobal,  // one shared embedding, no interpolation
  Erm,          // one task model fitted directly on pooled samples
};

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

enum class LossPooling {
  DomainMean,  // sum over domains of the per-domain mean loss
  PerSample,   // per-sample mean, rescaled by the domain count
};

std::string to_string(LossPooling pooling);
LossPooling parse_pooling(const std::string& text);

struct TrainConfig {
  Mode mode = Mode::Signn;
  TaskKind kind = TaskKind::Regression;
  std::size_t k = 8;
  std::size_t embedding_dim = 16;
  std::size_t num_layers = 2;
  std::vector<std::size_t> hypernet_hidden{64, 64};
  /// Hidden widths of the task model; empty gives a linear/logistic model.
  std::vector<std::size_t> task_hidden;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 300;
  double reg_weight = 0.5;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  LossPooling pooling = LossPooling::DomainMean;
  bool standardize_lengths = true;
  QueryInit query_init = QueryInit::NeighborMean;
  bool equirectangular = false;
  double slope = 0.2;
  std::size_t threads = 1;

  /// Throws BadConfig naming the first offending field.
  void validate() const;
  TaskModelSpec task_spec(std::size_t num_features) const;
  AdamOptions adam() const { return {learning_rate, beta1, beta2, eps}; }
};

/// Everything trainable. Unused blocks stay empty for a given mode.
struct ModelParams {
  EmbeddingTable z;     // Signn: one row per seen location; SignnGlobal: one row
  SignnParams theta;    // Signn only
  Mlp hypernet;         // Signn and SignnGlobal
  Tensor task_weights;  // Erm only, 1 x param_count
};

/// Names and pointers of the trainable tensors for `mode`, in binding order.
std::vector<std::pair<std::string, Tensor*>> parameter_blocks(ModelParams& params, Mode mode);
std::vector<ad::NamedTensor> named_parameters(const ModelParams& params, Mode mode);

/// Fixed inputs of the training objective. Features are already standardised.
struct TrainingProblem {
  std::vector<DomainSamples> domains;
  TaskModelSpec task;
  GraphFeatures graph;  // Signn only
  double length_scale = 1.0;
  TrainConfig config;
};

/// Initial parameters for `problem`, drawn from Rng(config.seed).
ModelParams init_params(const TrainingProblem& problem);

/// sum over domains of the task loss of decode(interpolate(s)) on domain s,
/// plus reg_weight * ||Z||^2. `leaves` are bound in parameter_blocks order.
ad::Var objective(ad::Tape& tape, const TrainingProblem& problem, const ModelParams& shape,
                  std::span<const ad::Var> leaves);

struct TrainedModel {
  TrainConfig config;
  TaskModelSpec task;
  /// Raw (lon, lat) of the training locations, in embedding-row order.
  std::vector<Vec2> seen_locations;
  FeatureStats feature_stats;
  double length_scale = 1.0;
  double lon_scale = 1.0;
  ModelParams params;
  std::vector<double> history;

  Vec2 planar(Vec2 lonlat) const { return {lonlat.x * lon_scale, lonlat.y}; }
};

/// Builds the training problem: standardises features, projects coordinates and
/// builds the seen graph. Throws TooFewLocations or EmptyDomain.
TrainingProblem make_problem(const Dataset& train_set, const TrainConfig& config,
                             FeatureStats* stats_out = nullptr, double* lon_scale_out = nullptr);

/// Full-batch Adam on every training domain. Deterministic for a given seed,
/// whatever the thread count. Throws NonFiniteLoss if the objective diverges.
TrainedModel train(const Dataset& train_set, const TrainConfig& config);

/// Builds the seen graph once and answers per-location queries against it.
class Predictor {
 public:
  explicit Predictor(const TrainedModel& model);

  std::vector<double> embedding_at(Vec2 lonlat) const;
  std::vector<double> task_weights_at(Vec2 lonlat) const;
  /// Raw features in, predictions (probabilities for classification) out.
  std::vector<double> predict(Vec2 lonlat, const Tensor& raw_xs) const;

 private:
  const TrainedModel& model_;
  std::optional<KnnGraph> graph_;
};

struct DomainMetric {
  double lat = 0.0;
  double lon = 0.0;
  std::size_t n = 0;
  std::optional<double> value;  // AUC is undefined for single-class domains
};

struct EvalReport {
  Mode mode = Mode::Signn;
  std::string metric_name;  // "mae" or "auc"
  double overall = 0.0;
  std::vector<DomainMetric> per_domain;
  std::vector<std::vector<double>> predictions;  // per domain
};

/// Generates a model for each (unseen) test location and scores its samples.
/// The overall metric pools all test samples. Features are raw.
EvalReport evaluate(const TrainedModel& model, std::span<const DomainSamples> test_domains);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of location ids; ceil(n * test_fraction) held out, at least
/// one and at most n - 1. Both lists are sorted.
Split split_domains(std::size_t num_locations, double test_fraction, std::uint64_t seed);

}  // namespace spatialgen
