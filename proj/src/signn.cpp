#include "spatialgen/signn.hpp"

#include <random>
#include <string>

#include "spatialgen/error.hpp"

namespace spatialgen {

SignnParams make_signn_params(std::size_t embedding_dim, std::size_t num_layers, Rng& rng) {
  if (embedding_dim == 0 || num_layers == 0) {
    throw Error(ErrorCode::BadConfig, "embedding dimension and layer count must be positive");
  }
  const std::size_t d = embedding_dim;
  const std::vector<std::size_t> edge_sizes{2, d, d};
  const std::vector<std::size_t> embed_sizes{d, d, d};
  std::uniform_real_distribution<double> alpha_dist(-0.1, 0.1);

  SignnParams params;
  for (std::size_t u = 0; u < num_layers; ++u) {
    LayerParams layer;
    layer.edge_mlp = make_mlp(edge_sizes, rng);
    layer.embed_mlp = make_mlp(embed_sizes, rng);
    layer.alpha = Tensor(3 * d, 1);
    for (double& v : layer.alpha.data()) v = alpha_dist(rng);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

void collect_tensors(SignnParams& params, std::vector<Tensor*>& out) {
  for (auto& layer : params.layers) {
    collect_tensors(layer.edge_mlp, out);
    collect_tensors(layer.embed_mlp, out);
    out.push_back(&layer.alpha);
  }
}

GraphFeatures make_graph_features(const KnnGraph& graph, std::span<const EdgeRep> reps,
                                  double length_scale) {
  const std::size_t n = graph.size();
  const std::size_t k = graph.k();
  if (reps.size() != n * k) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(n * k) +
                                              " edge representations, got " +
                                              std::to_string(reps.size()));
  }
  GraphFeatures out;
  out.num_nodes = n;
  out.k = k;
  out.sources.assign(graph.sources().begin(), graph.sources().end());
  out.targets.reserve(n * k);
  out.edge_features = Tensor(n * k, 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t e = i * k + t;
      out.targets.push_back(i);
      out.edge_features(e, 0) = reps[e].length / length_scale;
      out.edge_features(e, 1) = reps[e].angle;
    }
  }
  return out;
}

GraphFeatures make_graph_features(const KnnGraph& graph, double length_scale) {
  return make_graph_features(graph, edge_representations(graph), length_scale);
}

Tensor initial_embeddings(const KnnGraph& graph, const EmbeddingTable& table, QueryInit init) {
  const std::size_t seen = graph.num_seen();
  if (table.size() != seen) {
    throw Error(ErrorCode::ShapeMismatch, "embedding table has " + std::to_string(table.size()) +
                                              " rows for " + std::to_string(seen) +
                                              " seen nodes");
  }
  const std::size_t d = table.dim();
  Tensor z(graph.size(), d, 0.0);
  std::copy(table.z.data().begin(), table.z.data().end(), z.data().begin());
  if (const auto q = graph.query_id()) {
    auto row = z.row_view(*q);
    if (const auto twin = graph.coincident_with()) {
      const auto src = table.z.row_view(*twin);
      std::copy(src.begin(), src.end(), row.begin());
    } else if (init == QueryInit::NeighborMean) {
      const auto in = graph.in_edges(*q);
      for (std::size_t j : in) {
        for (std::size_t c = 0; c < d; ++c) row[c] += table.z(j, c);
      }
      for (double& v : row) v /= static_cast<double>(in.size());
    }
  }
  return z;
}

std::vector<LayerVars> bind(ad::Tape& tape, const SignnParams& params,
                            std::vector<ad::Var>* leaves) {
  std::vector<LayerVars> out;
  for (const auto& layer : params.layers) {
    LayerVars v;
    v.edge_mlp = bind(tape, layer.edge_mlp, leaves);
    v.embed_mlp = bind(tape, layer.embed_mlp, leaves);
    v.alpha = tape.leaf(layer.alpha);
    if (leaves != nullptr) leaves->push_back(v.alpha);
    out.push_back(std::move(v));
  }
  return out;
}

ad::Var attention_weights(const GraphFeatures& graph, ad::Var z, const LayerVars& layer,
                          double slope) {
  if (z.rows() != graph.num_nodes) {
    throw Error(ErrorCode::ShapeMismatch, "embedding matrix has " + std::to_string(z.rows()) +
                                              " rows for " + std::to_string(graph.num_nodes) +
                                              " nodes");
  }
  ad::Tape& tape = z.tape();
  const ad::Var edges = tape.leaf(graph.edge_features);
  const ad::Var lifted_edges = forward(layer.edge_mlp, edges, slope);
  const ad::Var lifted_nodes = forward(layer.embed_mlp, z, slope);
  const ad::Var features =
      ad::concat(ad::concat(lifted_edges, ad::gather_rows(lifted_nodes, graph.targets)),
                 ad::gather_rows(lifted_nodes, graph.sources));
  const ad::Var logits = ad::leaky_relu(ad::matmul(features, layer.alpha), slope);
  return ad::softmax(ad::reshape(logits, graph.num_nodes, graph.k));
}

ad::Var layer_forward(const GraphFeatures& graph, ad::Var z, const LayerVars& layer,
                      double slope) {
  const ad::Var weights = attention_weights(graph, z, layer, slope);
  return ad::weighted_sum(z, graph.sources, weights);
}

ad::Var signn_forward(const GraphFeatures& graph, ad::Var z, std::span<const LayerVars> layers,
                      double slope) {
  for (const auto& layer : layers) z = layer_forward(graph, z, layer, slope);
  return z;
}

double attention_logit(EdgeRep edge, std::span<const double> z_i, std::span<const double> z_j,
                       const LayerParams& layer, double slope) {
  const std::size_t d = layer.embed_mlp.input_dim();
  if (z_i.size() != d || z_j.size() != d) {
    throw Error(ErrorCode::ShapeMismatch, "embedding length does not match layer width");
  }
  ad::Tape tape;
  LayerVars vars;
  vars.edge_mlp = bind(tape, layer.edge_mlp);
  vars.embed_mlp = bind(tape, layer.embed_mlp);
  vars.alpha = tape.leaf(layer.alpha);

  std::vector<double> pair(z_i.begin(), z_i.end());
  pair.insert(pair.end(), z_j.begin(), z_j.end());
  const ad::Var nodes = tape.leaf(Tensor(2, d, std::move(pair)));
  const ad::Var e = tape.leaf(Tensor::row({edge.length, edge.angle}));
  const ad::Var lifted_nodes = forward(vars.embed_mlp, nodes, slope);
  const std::size_t first = 0, second = 1;
  const ad::Var features = ad::concat(
      ad::concat(forward(vars.edge_mlp, e, slope), ad::gather_rows(lifted_nodes, {&first, 1})),
      ad::gather_rows(lifted_nodes, {&second, 1}));
  return ad::leaky_relu(ad::matmul(features, vars.alpha), slope).value().item();
}

Tensor layer_forward(const GraphFeatures& graph, const Tensor& z, const LayerParams& layer,
                     double slope) {
  ad::Tape tape;
  LayerVars vars;
  vars.edge_mlp = bind(tape, layer.edge_mlp);
  vars.embed_mlp = bind(tape, layer.embed_mlp);
  vars.alpha = tape.leaf(layer.alpha);
  return layer_forward(graph, tape.leaf(z), vars, slope).value();
}

std::vector<double> interpolate(const KnnGraph& graph, std::size_t node,
                                const EmbeddingTable& table, const SignnParams& params,
                                const InterpolationOptions& options) {
  if (node >= graph.size()) throw Error(ErrorCode::ShapeMismatch, "node out of range");
  const GraphFeatures features = make_graph_features(graph, options.length_scale);
  ad::Tape tape;
  const auto layers = bind(tape, params);
  const ad::Var z0 = tape.leaf(initial_embeddings(graph, table, options.query_init));
  const ad::Var out = signn_forward(features, z0, layers, options.slope);
  const auto row = out.value().row_view(node);
  return {row.begin(), row.end()};
}

std::vector<double> interpolate_at(Vec2 s, const KnnGraph& seen_graph,
                                   const EmbeddingTable& table, const SignnParams& params,
                                   const InterpolationOptions& options) {
  const KnnGraph g = augment_with_query(seen_graph, s);
  return interpolate(g, *g.query_id(), table, params, options);
}

}  // namespace spatialgen
