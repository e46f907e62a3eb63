// Straight-line reference implementations shared by the unit and acceptance
// suites. Nothing here calls into the vectorised code paths under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "spatialgen/mlp.hpp"
#include "spatialgen/signn.hpp"
#include "spatialgen/spatial_graph.hpp"

namespace oracle {

using spatialgen::Vec2;

inline std::vector<spatialgen::Location> random_locations(std::size_t n, std::mt19937_64& rng,
                                                          double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<spatialgen::Location> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = u(rng);
    const double y = u(rng);
    out.push_back({i, {x, y}});
  }
  return out;
}

/// k nearest other points of `target` among `points[0..count)`, by (distance, id).
inline std::vector<std::size_t> nearest(const std::vector<Vec2>& points, std::size_t count,
                                        Vec2 target, std::size_t k, std::size_t skip) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < count; ++j) {
    if (j == skip) continue;
    const double dx = points[j].x - target.x;
    const double dy = points[j].y - target.y;
    all.emplace_back(std::sqrt(dx * dx + dy * dy), j);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < k; ++t) out.push_back(all[t].second);
  return out;
}

/// Neighbour lists of every node by exhaustive pairwise sort.
inline std::vector<std::vector<std::size_t>> knn_lists(const std::vector<Vec2>& points,
                                                       std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.push_back(nearest(points, points.size(), points[i], k, i));
  }
  return out;
}

/// Wraps an angle into [-pi, pi).
inline double wrap(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  while (a >= std::numbers::pi) a -= two_pi;
  while (a < -std::numbers::pi) a += two_pi;
  return a;
}

/// Turning angle of edge j -> i from polar angles: over k in N_j minus {i}
/// (and minus `also_skip`), take wrap(atan2(s_k - s_j) - atan2(s_j - s_i)) of
/// smallest magnitude, negative first on ties, then lower id.
inline double edge_angle(const spatialgen::KnnGraph& g, std::size_t i, std::size_t j) {
  const Vec2 si = g.coord(i);
  const Vec2 sj = g.coord(j);
  const double base = std::atan2(sj.y - si.y, sj.x - si.x);
  std::size_t skip = static_cast<std::size_t>(-1);
  if (g.query_id() && *g.query_id() == i && g.coincident_with()) skip = *g.coincident_with();
  bool found = false;
  double best = 0.0;
  for (std::size_t k : g.in_edges(j)) {
    if (k == i || k == skip) continue;
    const Vec2 sk = g.coord(k);
    const double lam = wrap(std::atan2(sk.y - sj.y, sk.x - sj.x) - base);
    if (!found || std::abs(lam) < std::abs(best) ||
        (std::abs(lam) == std::abs(best) && lam < best)) {
      best = lam;
      found = true;
    }
  }
  return found ? best : 0.0;
}

inline double leaky(double v, double slope) { return v > 0.0 ? v : slope * v; }

/// Dense stack evaluated one scalar at a time.
inline std::vector<double> mlp(const spatialgen::Mlp& m, std::vector<double> x, double slope) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    std::vector<double> y(layer.weight.cols());
    for (std::size_t c = 0; c < y.size(); ++c) {
      double acc = layer.bias(0, c);
      for (std::size_t r = 0; r < x.size(); ++r) acc += x[r] * layer.weight(r, c);
      y[c] = l + 1 < m.layers.size() ? leaky(acc, slope) : acc;
    }
    x = std::move(y);
  }
  return x;
}

/// One attention layer by explicit double loop over nodes and their in-edges.
/// `edge(i, t)` returns the (already length-scaled) features of the t-th in-edge of i.
template <class EdgeFn>
std::vector<std::vector<double>> layer(const spatialgen::KnnGraph& g,
                                       const std::vector<std::vector<double>>& z,
                                       const spatialgen::LayerParams& p, EdgeFn edge,
                                       double slope = 0.2) {
  const std::size_t d = z.front().size();
  std::vector<std::vector<double>> out(z.size(), std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto in = g.in_edges(i);
    std::vector<double> logits;
    for (std::size_t t = 0; t < in.size(); ++t) {
      const auto e = edge(i, t);
      const auto a = mlp(p.edge_mlp, {e.first, e.second}, slope);
      const auto b = mlp(p.embed_mlp, z[i], slope);
      const auto c = mlp(p.embed_mlp, z[in[t]], slope);
      double s = 0.0;
      for (std::size_t r = 0; r < d; ++r) {
        s += p.alpha(r, 0) * a[r] + p.alpha(d + r, 0) * b[r] + p.alpha(2 * d + r, 0) * c[r];
      }
      logits.push_back(leaky(s, slope));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& v : logits) {
      v = std::exp(v - mx);
      total += v;
    }
    for (std::size_t t = 0; t < in.size(); ++t) {
      for (std::size_t r = 0; r < d; ++r) out[i][r] += logits[t] / total * z[in[t]][r];
    }
  }
  return out;
}

/// Edge features (length / scale, atan2 angle) for the t-th in-edge of node i.
inline auto edge_features(const spatialgen::KnnGraph& g, double length_scale) {
  return [&g, length_scale](std::size_t i, std::size_t t) {
    const std::size_t j = g.in_edges(i)[t];
    const double dx = g.coord(j).x - g.coord(i).x;
    const double dy = g.coord(j).y - g.coord(i).y;
    return std::make_pair(std::sqrt(dx * dx + dy * dy) / length_scale, edge_angle(g, i, j));
  };
}

/// All node embeddings after every layer; unseen query rows start at the
/// neighbour mean (or the twin's row when coincident).
inline std::vector<std::vector<double>> propagate(const spatialgen::KnnGraph& g,
                                                  const spatialgen::Tensor& table,
                                                  const spatialgen::SignnParams& params,
                                                  double length_scale, double slope = 0.2) {
  const std::size_t d = table.cols();
  std::vector<std::vector<double>> z(g.size(), std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t c = 0; c < d; ++c) z[i][c] = table(i, c);
  }
  if (const auto q = g.query_id()) {
    if (const auto twin = g.coincident_with()) {
      z[*q] = z[*twin];
    } else {
      for (std::size_t j : g.in_edges(*q)) {
        for (std::size_t c = 0; c < d; ++c) z[*q][c] += table(j, c) / static_cast<double>(g.k());
      }
    }
  }
  for (const auto& lp : params.layers) z = layer(g, z, lp, edge_features(g, length_scale), slope);
  return z;
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counted 1/2.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<double>& y) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (y[a] != 1.0 || y[b] != 0.0) continue;
      pairs += 1.0;
      if (s[a] > s[b]) good += 1.0;
      else if (s[a] == s[b]) good += 0.5;
    }
  }
  return good / pairs;
}

}  // namespace oracle
