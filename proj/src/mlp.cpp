#include "spatialgen/mlp.hpp"

#include <cmath>

#include "spatialgen/error.hpp"

namespace spatialgen {

std::vector<std::size_t> Mlp::sizes() const {
  std::vector<std::size_t> out;
  if (layers.empty()) return out;
  out.push_back(input_dim());
  for (const auto& layer : layers) out.push_back(layer.weight.cols());
  return out;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor w(fan_in, fan_out);
  for (double& v : w.data()) v = dist(rng);
  return w;
}

Mlp make_mlp(std::span<const std::size_t> sizes, Rng& rng) {
  if (sizes.size() < 2) throw Error(ErrorCode::BadConfig, "an MLP needs at least two sizes");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i + 1] == 0) {
      throw Error(ErrorCode::BadConfig, "MLP layer sizes must be positive");
    }
    mlp.layers.push_back(Dense{glorot_uniform(sizes[i], sizes[i + 1], rng),
                               Tensor(1, sizes[i + 1], 0.0)});
  }
  return mlp;
}

MlpVars bind(ad::Tape& tape, const Mlp& mlp, std::vector<ad::Var>* leaves) {
  MlpVars vars;
  for (const auto& layer : mlp.layers) {
    vars.weights.push_back(tape.leaf(layer.weight));
    vars.biases.push_back(tape.leaf(layer.bias));
    if (leaves != nullptr) {
      leaves->push_back(vars.weights.back());
      leaves->push_back(vars.biases.back());
    }
  }
  return vars;
}

void collect_tensors(Mlp& mlp, std::vector<Tensor*>& out) {
  for (auto& layer : mlp.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
}

ad::Var forward(const MlpVars& mlp, ad::Var x, double slope) {
  const std::size_t n = mlp.weights.size();
  for (std::size_t i = 0; i < n; ++i) {
    x = ad::add(ad::matmul(x, mlp.weights[i]), mlp.biases[i]);
    if (i + 1 < n) x = ad::leaky_relu(x, slope);
  }
  return x;
}

}  // namespace spatialgen
