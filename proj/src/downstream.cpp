#include "spatialgen/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spatialgen/error.hpp"

namespace spatialgen {
namespace {

constexpr double kProbClamp = 1e-7;

double leaky(double v, double slope) { return v > 0.0 ? v : slope * v; }

double logistic(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

void require_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch, std::string(what) + ": lengths " + std::to_string(a) +
                                               " and " + std::to_string(b) + " differ");
  }
}

}  // namespace

std::string to_string(TaskKind kind) {
  return kind == TaskKind::Regression ? "regression" : "classification";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "regression") return TaskKind::Regression;
  if (text == "classification" || text == "binary_classification") {
    return TaskKind::BinaryClassification;
  }
  throw Error(ErrorCode::BadConfig, "unknown task kind '" + text + "'");
}

void TaskModelSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw Error(ErrorCode::BadConfig, "task model needs at least an input and an output size");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw Error(ErrorCode::BadConfig, "task model layer sizes must be >= 1");
  }
  if (layer_sizes.back() != 1) {
    throw Error(ErrorCode::BadConfig, "task model must have a single output");
  }
}

std::size_t param_count(const TaskModelSpec& spec) {
  spec.validate();
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < spec.layer_sizes.size(); ++i) {
    total += spec.layer_sizes[i] * spec.layer_sizes[i + 1] + spec.layer_sizes[i + 1];
  }
  return total;
}

Mlp make_hypernet(std::size_t embedding_dim, std::span<const std::size_t> hidden,
                  const TaskModelSpec& spec, Rng& rng) {
  std::vector<std::size_t> sizes{embedding_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(param_count(spec));
  return make_mlp(sizes, rng);
}

ad::Var decode(ad::Var z, const MlpVars& hypernet, double slope) {
  return forward(hypernet, z, slope);
}

ad::Var task_forward(ad::Var w, const TaskModelSpec& spec, ad::Var x, double slope) {
  const std::size_t count = param_count(spec);
  if (w.rows() != 1 || w.cols() != count) {
    throw Error(ErrorCode::ShapeMismatch, "task weights " + w.value().shape_string() +
                                              " do not match " + std::to_string(count) +
                                              " parameters");
  }
  if (x.cols() != spec.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "features have " + std::to_string(x.cols()) +
                                              " columns, model expects " +
                                              std::to_string(spec.input_dim()));
  }
  const std::size_t num_layers = spec.layer_sizes.size() - 1;
  std::size_t offset = 0;
  ad::Var h = x;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const ad::Var weight = ad::reshape(ad::slice_cols(w, offset, offset + in * out), in, out);
    offset += in * out;
    const ad::Var bias = ad::slice_cols(w, offset, offset + out);
    offset += out;
    h = ad::add(ad::matmul(h, weight), bias);
    if (l + 1 < num_layers) h = ad::leaky_relu(h, slope);
  }
  if (spec.kind == TaskKind::BinaryClassification) h = ad::sigmoid(h);
  return h;
}

std::vector<double> decode(std::span<const double> z, const Mlp& hypernet, double slope) {
  if (z.size() != hypernet.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "embedding length " + std::to_string(z.size()) +
                                              " does not match hypernetwork input " +
                                              std::to_string(hypernet.input_dim()));
  }
  std::vector<double> h(z.begin(), z.end());
  for (std::size_t l = 0; l < hypernet.layers.size(); ++l) {
    const Dense& layer = hypernet.layers[l];
    std::vector<double> next(layer.weight.cols(), 0.0);
    for (std::size_t t = 0; t < h.size(); ++t) {
      for (std::size_t j = 0; j < next.size(); ++j) next[j] += h[t] * layer.weight(t, j);
    }
    for (std::size_t j = 0; j < next.size(); ++j) {
      next[j] += layer.bias(0, j);
      if (l + 1 < hypernet.layers.size()) next[j] = leaky(next[j], slope);
    }
    h = std::move(next);
  }
  return h;
}

double task_forward(std::span<const double> w, const TaskModelSpec& spec,
                    std::span<const double> x, double slope) {
  require_lengths(w.size(), param_count(spec), "task weights");
  if (x.size() != spec.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "feature vector has " + std::to_string(x.size()) +
                                              " entries, model expects " +
                                              std::to_string(spec.input_dim()));
  }
  const std::size_t num_layers = spec.layer_sizes.size() - 1;
  std::vector<double> h(x.begin(), x.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    std::vector<double> next(out, 0.0);
    for (std::size_t t = 0; t < in; ++t) {
      for (std::size_t j = 0; j < out; ++j) next[j] += h[t] * w[offset + t * out + j];
    }
    offset += in * out;
    for (std::size_t j = 0; j < out; ++j) {
      next[j] += w[offset + j];
      if (l + 1 < num_layers) next[j] = leaky(next[j], slope);
    }
    offset += out;
    h = std::move(next);
  }
  return spec.kind == TaskKind::BinaryClassification ? logistic(h[0]) : h[0];
}

std::vector<double> task_forward(std::span<const double> w, const TaskModelSpec& spec,
                                 const Tensor& xs, double slope) {
  std::vector<double> out;
  out.reserve(xs.rows());
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    out.push_back(task_forward(w, spec, xs.row_view(i), slope));
  }
  return out;
}

Tensor init_task_weights(const TaskModelSpec& spec, Rng& rng) {
  Tensor w(1, param_count(spec), 0.0);
  std::size_t offset = 0;
  const std::size_t num_layers = spec.layer_sizes.size() - 1;
  for (std::size_t l = 0; l + 1 < num_layers; ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const Tensor block = glorot_uniform(in, out, rng);
    std::copy(block.data().begin(), block.data().end(), w.data().begin() + offset);
    offset += in * out + out;
  }
  return w;
}

ad::Var mse_loss(ad::Var pred, const Tensor& target) {
  if (pred.value().size() != target.size()) {
    throw Error(ErrorCode::LengthMismatch, "mse: prediction and target lengths differ");
  }
  const ad::Var t = pred.tape().leaf(Tensor(pred.rows(), pred.cols(),
                                            std::vector<double>(target.data().begin(),
                                                                target.data().end())));
  return ad::scale(ad::sum_sq(ad::sub(pred, t)), 1.0 / static_cast<double>(target.size()));
}

ad::Var bce_loss(ad::Var prob, const Tensor& label) {
  if (prob.value().size() != label.size()) {
    throw Error(ErrorCode::LengthMismatch, "bce: probability and label lengths differ");
  }
  return ad::bce(prob, Tensor(prob.rows(), prob.cols(),
                              std::vector<double>(label.data().begin(), label.data().end())));
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  require_lengths(pred.size(), target.size(), "mse");
  if (pred.empty()) throw Error(ErrorCode::LengthMismatch, "mse over zero samples");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

double bce_loss(std::span<const double> prob, std::span<const double> label) {
  require_lengths(prob.size(), label.size(), "bce");
  if (prob.empty()) throw Error(ErrorCode::LengthMismatch, "bce over zero samples");
  double total = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], kProbClamp, 1.0 - kProbClamp);
    total -= label[i] * std::log(p) + (1.0 - label[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(prob.size());
}

double mae(std::span<const double> pred, std::span<const double> target) {
  require_lengths(pred.size(), target.size(), "mae");
  if (pred.empty()) throw Error(ErrorCode::LengthMismatch, "mae over zero samples");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += std::abs(pred[i] - target[i]);
  return total / static_cast<double>(pred.size());
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  require_lengths(scores.size(), labels.size(), "auc");
  std::size_t positives = 0, negatives = 0;
  for (double y : labels) {
    if (y == 1.0) {
      ++positives;
    } else if (y == 0.0) {
      ++negatives;
    } else {
      throw Error(ErrorCode::NonBinaryLabel, "auc labels must be 0 or 1");
    }
  }
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::DegenerateLabels, "auc needs both positive and negative labels");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie groups from the lowest score up.
  double correct = 0.0;
  double negatives_below = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    double pos = 0.0, neg = 0.0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] == 1.0 ? pos : neg) += 1.0;
      ++end;
    }
    correct += pos * negatives_below + 0.5 * pos * neg;
    negatives_below += neg;
    start = end;
  }
  return correct / (static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace spatialgen
