#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "spatialgen/tape.hpp"
#include "spatialgen/tensor.hpp"

namespace spatialgen {

using Rng = std::mt19937_64;

/// Fully connected layer computing x * weight + bias; weight is (in x out),
/// bias is (1 x out).
struct Dense {
  Tensor weight;
  Tensor bias;
};

/// Stack of dense layers with leaky-ReLU between them and a linear output.
struct Mlp {
  std::vector<Dense> layers;

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  std::vector<std::size_t> sizes() const;
};

/// Weights uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)), biases zero.
Mlp make_mlp(std::span<const std::size_t> sizes, Rng& rng);
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

/// Records every weight and bias as a leaf, weight before bias, layer by layer.
/// When `leaves` is given the new leaves are appended to it in that order.
MlpVars bind(ad::Tape& tape, const Mlp& mlp, std::vector<ad::Var>* leaves = nullptr);

/// Pointers in the same order `bind` records leaves.
void collect_tensors(Mlp& mlp, std::vector<Tensor*>& out);

ad::Var forward(const MlpVars& mlp, ad::Var x, double slope = 0.2);

}  // namespace spatialgen
