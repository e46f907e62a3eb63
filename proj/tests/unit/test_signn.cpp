#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "../common/oracles.hpp"
#include "spatialgen/finite_diff.hpp"
#include "spatialgen/signn.hpp"

using namespace spatialgen;

namespace {

Tensor random_table(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t(n, d);
  for (double& v : t.data()) v = g(rng);
  return t;
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.emplace_back(t.row_view(r).begin(), t.row_view(r).end());
  return out;
}

SignnParams random_params(std::size_t d, std::size_t u, std::uint64_t seed) {
  Rng rng(seed);
  SignnParams p = make_signn_params(d, u, rng);
  // Non-zero biases and a larger alpha so every path through the layer matters.
  std::uniform_real_distribution<double> b(-0.5, 0.5);
  for (auto& layer : p.layers) {
    for (auto* mlp : {&layer.edge_mlp, &layer.embed_mlp}) {
      for (auto& dense : mlp->layers) {
        for (double& v : dense.bias.data()) v = b(rng);
      }
    }
    for (double& v : layer.alpha.data()) v *= 10.0;
  }
  return p;
}

void zero_alpha(SignnParams& p) {
  for (auto& layer : p.layers) layer.alpha = Tensor(layer.alpha.rows(), 1, 0.0);
}

}  // namespace

TEST(AttentionLogit, ZeroAlphaGivesZero) {
  SignnParams p = random_params(3, 1, 1);
  zero_alpha(p);
  EXPECT_EQ(attention_logit({0.7, -1.2}, std::vector<double>{1, 2, 3}, std::vector<double>{-1, 0, 4},
                            p.layers[0]),
            0.0);
}

TEST(AttentionLogit, DeterministicAndMatchesHandChain) {
  // d_z = 2 with hand-set weights; each MLP is 2 -> 2 -> 2.
  LayerParams lp;
  auto dense = [](std::initializer_list<std::initializer_list<double>> w,
                  std::initializer_list<double> b) {
    return Dense{Tensor::from_rows(w), Tensor::row(b)};
  };
  lp.edge_mlp.layers = {dense({{0.5, -0.25}, {0.1, 0.3}}, {0.05, -0.1}),
                        dense({{1.0, 0.2}, {-0.4, 0.6}}, {0.0, 0.1})};
  lp.embed_mlp.layers = {dense({{0.3, 0.0}, {-0.2, 0.7}}, {0.1, 0.0}),
                         dense({{0.5, 0.5}, {0.25, -1.0}}, {-0.05, 0.02})};
  lp.alpha = Tensor::column({0.3, -0.2, 0.5, 0.1, -0.4, 0.25});
  const EdgeRep e{1.5, -0.7};
  const std::vector<double> zi{0.2, -0.6};
  const std::vector<double> zj{-1.1, 0.4};

  auto lk = [](double v) { return v > 0 ? v : 0.2 * v; };
  // m1(e)
  const double h0 = lk(1.5 * 0.5 + -0.7 * 0.1 + 0.05);
  const double h1 = lk(1.5 * -0.25 + -0.7 * 0.3 - 0.1);
  const double a0 = h0 * 1.0 + h1 * -0.4 + 0.0;
  const double a1 = h0 * 0.2 + h1 * 0.6 + 0.1;
  // m2(z)
  auto m2 = [&](const std::vector<double>& z) {
    const double g0 = lk(z[0] * 0.3 + z[1] * -0.2 + 0.1);
    const double g1 = lk(z[0] * 0.0 + z[1] * 0.7 + 0.0);
    return std::pair{g0 * 0.5 + g1 * 0.25 - 0.05, g0 * 0.5 + g1 * -1.0 + 0.02};
  };
  const auto [b0, b1] = m2(zi);
  const auto [c0, c1] = m2(zj);
  const double want = lk(0.3 * a0 - 0.2 * a1 + 0.5 * b0 + 0.1 * b1 - 0.4 * c0 + 0.25 * c1);

  const double got = attention_logit(e, zi, zj, lp);
  EXPECT_NEAR(got, want, 1e-15);
  EXPECT_EQ(got, attention_logit(e, zi, zj, lp));
}

TEST(LayerForward, SingleNeighbourCopies) {
  std::mt19937_64 rng(1);
  const auto g = build_knn_graph(oracle::random_locations(6, rng), 1);
  const Tensor z = random_table(6, 3, rng);
  const Tensor out = layer_forward(make_graph_features(g, 1.0), z, random_params(3, 1, 2).layers[0]);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t j = g.in_edges(i)[0];
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out(i, c), z(j, c));
  }
}

TEST(LayerForward, SymmetricNeighboursAverage) {
  // Node 0 is fed by nodes 1 and 2 through identical edge features; with the
  // source block of alpha zeroed the two logits are equal.
  GraphFeatures f;
  f.num_nodes = 3;
  f.k = 2;
  f.sources = {1, 2, 0, 2, 0, 1};
  f.targets = {0, 0, 1, 1, 2, 2};
  f.edge_features = Tensor::from_rows({{1, 0.5}, {1, 0.5}, {1, 0.1}, {2, 0.3}, {1, -1}, {2, 1}});
  SignnParams p = random_params(2, 1, 3);
  for (std::size_t r = 4; r < 6; ++r) p.layers[0].alpha(r, 0) = 0.0;
  const Tensor z = Tensor::from_rows({{5, 5}, {1, -2}, {3, 4}});
  const Tensor out = layer_forward(f, z, p.layers[0]);
  EXPECT_NEAR(out(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(out(0, 1), 1.0, 1e-15);

  // Identical sources and embeddings: the result is that embedding.
  const Tensor same = Tensor::from_rows({{5, 5}, {1, -2}, {1, -2}});
  const Tensor out2 = layer_forward(f, same, random_params(2, 1, 4).layers[0]);
  EXPECT_DOUBLE_EQ(out2(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out2(0, 1), -2.0);
}

TEST(LayerForward, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 7;
    const std::size_t k = 1 + rng() % (n - 1);
    const std::size_t d = 1 + rng() % 4;
    const auto g = build_knn_graph(oracle::random_locations(n, rng), k);
    const Tensor z = random_table(n, d, rng);
    const auto params = random_params(d, 1, rng());
    const double scale = 0.5 + static_cast<double>(trial % 3);
    const Tensor got = layer_forward(make_graph_features(g, scale), z, params.layers[0]);
    const auto want = oracle::layer(g, rows_of(z), params.layers[0], oracle::edge_features(g, scale));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; ++c) ASSERT_NEAR(got(i, c), want[i][c], 1e-12);
    }
  }
}

TEST(LayerForward, AttentionIsSimplexAndUpdateStaysInHull) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 4 + rng() % 12;
    const std::size_t k = 1 + rng() % 3;
    const auto g = build_knn_graph(oracle::random_locations(n, rng), k);
    const auto features = make_graph_features(g, 0.3);
    const Tensor z = random_table(n, 3, rng);
    const auto params = random_params(3, 2, rng());

    ad::Tape tape;
    const auto layers = bind(tape, params);
    ad::Var cur = tape.leaf(z);
    for (const auto& layer : layers) {
      const Tensor w = attention_weights(features, cur, layer).value();
      for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
          EXPECT_GE(w(i, t), 0.0);
          total += w(i, t);
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
      const Tensor before = cur.value();
      cur = layer_forward(features, cur, layer);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
          double lo = 1e300, hi = -1e300;
          for (std::size_t j : g.in_edges(i)) {
            lo = std::min(lo, before(j, c));
            hi = std::max(hi, before(j, c));
          }
          EXPECT_GE(cur.value()(i, c), lo - 1e-12);
          EXPECT_LE(cur.value()(i, c), hi + 1e-12);
        }
      }
    }
  }
}

TEST(LayerForward, PermutationEquivariant) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng() % 10;
    const auto l = oracle::random_locations(n, rng);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Location> moved(n);
    const Tensor z = random_table(n, 3, rng);
    Tensor zp(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      moved[perm[i]] = {perm[i], l[i].coord};
      for (std::size_t c = 0; c < 3; ++c) zp(perm[i], c) = z(i, c);
    }
    const auto params = random_params(3, 1, rng());
    const Tensor a = layer_forward(make_graph_features(build_knn_graph(l, 3), 1.0), z, params.layers[0]);
    const Tensor b =
        layer_forward(make_graph_features(build_knn_graph(moved, 3), 1.0), zp, params.layers[0]);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(b(perm[i], c), a(i, c));
    }
  }
}

TEST(Interpolate, SingleNeighbourReturnsItsEmbedding) {
  std::mt19937_64 rng(15);
  const auto g = build_knn_graph(oracle::random_locations(5, rng), 1);
  const EmbeddingTable table{random_table(5, 4, rng)};
  const auto params = random_params(4, 1, 3);
  const auto q = augment_with_query(g, {0.41, 0.77});
  const std::size_t j = q.in_edges(*q.query_id())[0];
  const auto z = interpolate(q, *q.query_id(), table, params, {});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(z[c], table.z(j, c));
}

TEST(Interpolate, SquareCentroidWithZeroAlphaIsNeighbourMean) {
  std::vector<Location> sq{{0, {0, 0}}, {1, {1, 0}}, {2, {1, 1}}, {3, {0, 1}}};
  const auto g = build_knn_graph(sq, 3);
  const Tensor zt = Tensor::from_rows({{1, 2}, {3, -1}, {1, 2}, {3, -1}});
  SignnParams params = random_params(2, 1, 5);
  zero_alpha(params);
  // All four corners tie; the three lowest ids win.
  const auto z = interpolate_at({0.5, 0.5}, g, EmbeddingTable{zt}, params, {});
  EXPECT_NEAR(z[0], 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(z[1], 1.0, 1e-15);
}

TEST(Interpolate, MatchesStraightLineOracle) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const auto l = oracle::random_locations(12, rng);
    const auto g = build_knn_graph(l, 3);
    const EmbeddingTable table{random_table(12, 4, rng)};
    const auto params = random_params(4, 2, rng());
    InterpolationOptions opts;
    opts.length_scale = mean_seen_edge_length(g);
    const Vec2 s = trial % 4 == 0 ? l[trial % 12].coord : Vec2{0.1 + 0.04 * trial, 0.5};
    const auto q = augment_with_query(g, s);
    const auto got = interpolate_at(s, g, table, params, opts);
    const auto want = oracle::propagate(q, table.z, params, opts.length_scale);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(got[c], want[*q.query_id()][c], 1e-10);

    // Seen nodes through the un-augmented graph.
    const auto seen = oracle::propagate(g, table.z, params, opts.length_scale);
    for (std::size_t node = 0; node < 12; node += 5) {
      const auto zs = interpolate(g, node, table, params, opts);
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(zs[c], seen[node][c], 1e-10);
    }
  }
}

TEST(Interpolate, CoincidentQueryEqualsSeenNodeExactly) {
  std::mt19937_64 rng(17);
  const auto l = oracle::random_locations(15, rng);
  const auto g = build_knn_graph(l, 4);
  const EmbeddingTable table{random_table(15, 3, rng)};
  const auto params = random_params(3, 2, 8);
  InterpolationOptions opts;
  opts.length_scale = mean_seen_edge_length(g);
  for (std::size_t m = 0; m < 15; ++m) {
    EXPECT_EQ(interpolate_at(l[m].coord, g, table, params, opts),
              interpolate(g, m, table, params, opts));
  }
}

TEST(Interpolate, ZeroAlphaIsIteratedNeighbourAveraging) {
  std::mt19937_64 rng(18);
  const auto l = oracle::random_locations(10, rng);
  const auto g = build_knn_graph(l, 3);
  const EmbeddingTable table{random_table(10, 2, rng)};
  SignnParams params = random_params(2, 3, 9);
  zero_alpha(params);
  const auto q = augment_with_query(g, {0.33, 0.66});
  const std::size_t qi = *q.query_id();

  auto z = rows_of(table.z);
  z.push_back({0.0, 0.0});
  for (std::size_t j : q.in_edges(qi)) {
    for (std::size_t c = 0; c < 2; ++c) z[qi][c] += table.z(j, c) / 3.0;
  }
  for (int u = 0; u < 3; ++u) {
    auto next = z;
    for (std::size_t i = 0; i < q.size(); ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        double acc = 0.0;
        for (std::size_t j : q.in_edges(i)) acc += z[j][c] / 3.0;
        next[i][c] = acc;
      }
    }
    z = next;
  }
  const auto got = interpolate(q, qi, table, params, {});
  for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(got[c], z[qi][c], 1e-12);
}

TEST(Interpolate, PureAndNonMutating) {
  std::mt19937_64 rng(19);
  const auto g = build_knn_graph(oracle::random_locations(9, rng), 3);
  const EmbeddingTable table{random_table(9, 3, rng)};
  const Tensor copy = table.z;
  const auto params = random_params(3, 2, 10);
  const auto a = interpolate(g, 4, table, params, {});
  const auto b = interpolate(g, 4, table, params, {});
  EXPECT_EQ(a, b);
  EXPECT_EQ(table.z, copy);
}

TEST(Interpolate, ZeroQueryInitOption) {
  std::mt19937_64 rng(20);
  const auto g = build_knn_graph(oracle::random_locations(6, rng), 2);
  const EmbeddingTable table{random_table(6, 2, rng)};
  const auto q = augment_with_query(g, {0.5, 0.5});
  const Tensor z0 = initial_embeddings(q, table, QueryInit::Zero);
  EXPECT_EQ(z0(6, 0), 0.0);
  EXPECT_EQ(z0(6, 1), 0.0);
  const Tensor zm = initial_embeddings(q, table, QueryInit::NeighborMean);
  const auto in = q.in_edges(6);
  EXPECT_DOUBLE_EQ(zm(6, 0), (table.z(in[0], 0) + table.z(in[1], 0)) / 2.0);
}

TEST(GradientCheck, StackedLayers) {
  std::mt19937_64 rng(21);
  const auto g = build_knn_graph(oracle::random_locations(7, rng), 3);
  const auto features = make_graph_features(g, mean_seen_edge_length(g));
  SignnParams params = random_params(3, 2, 11);
  std::vector<Tensor*> tensors;
  collect_tensors(params, tensors);
  std::vector<Tensor> values{random_table(7, 3, rng)};
  for (Tensor* t : tensors) values.push_back(*t);

  auto loss = [&](ad::Tape& tape, std::vector<ad::Var>& leaves) {
    leaves.clear();
    for (const Tensor& v : values) leaves.push_back(tape.leaf(v));
    std::vector<LayerVars> layers(2);
    std::size_t pos = 1;
    for (auto& layer : layers) {
      for (auto* m : {&layer.edge_mlp, &layer.embed_mlp}) {
        for (int l = 0; l < 2; ++l) {
          m->weights.push_back(leaves[pos++]);
          m->biases.push_back(leaves[pos++]);
        }
      }
      layer.alpha = leaves[pos++];
    }
    return ad::sum_sq(signn_forward(features, leaves[0], layers));
  };

  ad::Tape tape;
  std::vector<ad::Var> leaves;
  const ad::Gradients grads = tape.backward(loss(tape, leaves));
  // Shift-invariant entries (final biases, target block of alpha) have exact
  // zero gradients; the absolute term absorbs their rounding noise.
  const double h = 1e-5;
  for (std::size_t b = 0; b < values.size(); ++b) {
    const Tensor analytic = grads[leaves[b]];
    for (std::size_t i = 0; i < values[b].size(); ++i) {
      const double original = values[b][i];
      std::vector<ad::Var> tmp;
      values[b][i] = original + h;
      ad::Tape up;
      const double fu = loss(up, tmp).value().item();
      values[b][i] = original - h;
      ad::Tape down;
      const double fd = loss(down, tmp).value().item();
      values[b][i] = original;
      const double numeric = (fu - fd) / (2.0 * h);
      EXPECT_NEAR(analytic[i], numeric,
                  1e-4 * std::max(std::abs(analytic[i]), std::abs(numeric)) + 1e-8)
          << "block " << b << " entry " << i;
    }
  }
}
