#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spatialgen/mlp.hpp"
#include "spatialgen/tape.hpp"
#include "spatialgen/tensor.hpp"

namespace spatialgen {

enum class TaskKind { Regression, BinaryClassification };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

/// Architecture of the per-location prediction model: dense layers of the given
/// sizes, leaky-ReLU between them, identity (regression) or sigmoid
/// (classification) on the single output.
struct TaskModelSpec {
  TaskKind kind = TaskKind::Regression;
  std::vector<std::size_t> layer_sizes;  // [p, h1, ..., 1]

  std::size_t input_dim() const { return layer_sizes.front(); }
  void validate() const;
  friend bool operator==(const TaskModelSpec&, const TaskModelSpec&) = default;
};

/// Length of the flat weight vector: sum of n_in * n_out + n_out over layers.
/// Layout is layer-major: W1 (n_in x n_out, row-major), b1, W2, b2, ...
std::size_t param_count(const TaskModelSpec& spec);

/// Hypernetwork d_z -> hidden... -> param_count(spec).
Mlp make_hypernet(std::size_t embedding_dim, std::span<const std::size_t> hidden,
                  const TaskModelSpec& spec, Rng& rng);

/// Task weights for one or more embeddings (one row each).
ad::Var decode(ad::Var z, const MlpVars& hypernet, double slope = 0.2);
/// Predictions (N x 1) of the model whose flat weights are the 1 x P row `w`.
ad::Var task_forward(ad::Var w, const TaskModelSpec& spec, ad::Var x, double slope = 0.2);

std::vector<double> decode(std::span<const double> z, const Mlp& hypernet, double slope = 0.2);
double task_forward(std::span<const double> w, const TaskModelSpec& spec,
                    std::span<const double> x, double slope = 0.2);
/// Batch form: one prediction per row of `xs`.
std::vector<double> task_forward(std::span<const double> w, const TaskModelSpec& spec,
                                 const Tensor& xs, double slope = 0.2);

/// Flat weights for a task model trained directly: Glorot hidden layers, zero
/// output layer and biases.
Tensor init_task_weights(const TaskModelSpec& spec, Rng& rng);

ad::Var mse_loss(ad::Var pred, const Tensor& target);
ad::Var bce_loss(ad::Var prob, const Tensor& label);
double mse_loss(std::span<const double> pred, std::span<const double> target);
double bce_loss(std::span<const double> prob, std::span<const double> label);

double mae(std::span<const double> pred, std::span<const double> target);
/// Probability that a random positive outranks a random negative, ties counted
/// one half. Throws DegenerateLabels unless both classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

}  // namespace spatialgen
