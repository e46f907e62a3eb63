#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spatialgen/mlp.hpp"
#include "spatialgen/spatial_graph.hpp"
#include "spatialgen/tape.hpp"
#include "spatialgen/tensor.hpp"

namespace spatialgen {

/// Learned embedding per seen location, one row each.
struct EmbeddingTable {
  Tensor z;

  std::size_t dim() const noexcept { return z.cols(); }
  std::size_t size() const noexcept { return z.rows(); }
};

/// One attention-based interpolation layer.
struct LayerParams {
  Mlp edge_mlp;   // 2 -> d -> d, lifts (scaled length, angle)
  Mlp embed_mlp;  // d -> d -> d, lifts embeddings
  Tensor alpha;   // (3d x 1), scores [edge || target || source]
};

struct SignnParams {
  std::vector<LayerParams> layers;

  std::size_t embedding_dim() const { return layers.front().embed_mlp.input_dim(); }
};

SignnParams make_signn_params(std::size_t embedding_dim, std::size_t num_layers, Rng& rng);
void collect_tensors(SignnParams& params, std::vector<Tensor*>& out);

enum class QueryInit {
  NeighborMean,  // mean of the query's in-neighbours' stored embeddings
  Zero,
};

struct InterpolationOptions {
  /// Edge lengths are divided by this before entering the edge MLP.
  double length_scale = 1.0;
  QueryInit query_init = QueryInit::NeighborMean;
  double slope = 0.2;
};

/// Edge features for the whole graph, node-major like KnnGraph::sources().
struct GraphFeatures {
  std::size_t num_nodes = 0;
  std::size_t k = 0;
  std::vector<std::size_t> sources;
  std::vector<std::size_t> targets;
  Tensor edge_features;  // (num_nodes * k) x 2: (length / length_scale, angle)
};

GraphFeatures make_graph_features(const KnnGraph& graph, std::span<const EdgeRep> reps,
                                  double length_scale);
GraphFeatures make_graph_features(const KnnGraph& graph, double length_scale);

/// Layer-0 embeddings for every node of `graph`: stored rows for seen nodes,
/// plus the query row chosen by `init` (a coincident query copies its twin).
Tensor initial_embeddings(const KnnGraph& graph, const EmbeddingTable& table, QueryInit init);

// Differentiable path.

struct LayerVars {
  MlpVars edge_mlp;
  MlpVars embed_mlp;
  ad::Var alpha;
};

std::vector<LayerVars> bind(ad::Tape& tape, const SignnParams& params,
                            std::vector<ad::Var>* leaves = nullptr);

/// Attention weights (num_nodes x k); row i is a softmax over node i's in-edges.
ad::Var attention_weights(const GraphFeatures& graph, ad::Var z, const LayerVars& layer,
                          double slope = 0.2);
/// Synchronous update: every row of the result is computed from `z`.
ad::Var layer_forward(const GraphFeatures& graph, ad::Var z, const LayerVars& layer,
                      double slope = 0.2);
ad::Var signn_forward(const GraphFeatures& graph, ad::Var z, std::span<const LayerVars> layers,
                      double slope = 0.2);

// Plain evaluation.

/// leaky_relu(alpha^T [m1(edge) || m2(z_i) || m2(z_j)]). `edge` must already be
/// length-scaled.
double attention_logit(EdgeRep edge, std::span<const double> z_i, std::span<const double> z_j,
                       const LayerParams& layer, double slope = 0.2);
Tensor layer_forward(const GraphFeatures& graph, const Tensor& z, const LayerParams& layer,
                     double slope = 0.2);

/// Embedding of `node` after all layers over `graph` (which may carry a query).
/// The table is read, never written.
std::vector<double> interpolate(const KnnGraph& graph, std::size_t node,
                                const EmbeddingTable& table, const SignnParams& params,
                                const InterpolationOptions& options);

/// Augments `seen_graph` with `s` and returns the query's embedding.
std::vector<double> interpolate_at(Vec2 s, const KnnGraph& seen_graph,
                                   const EmbeddingTable& table, const SignnParams& params,
                                   const InterpolationOptions& options);

}  // namespace spatialgen
