#include "spatialgen/spatial_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "spatialgen/error.hpp"

namespace spatialgen {
namespace {

void require_finite(Vec2 v) {
  if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
    throw Error(ErrorCode::NonFinite, "coordinate is not finite");
  }
}

/// The k nearest of `candidates` to `p`, sorted by (distance, id).
std::vector<std::size_t> nearest(std::span<const Location> nodes, std::size_t count, Vec2 p,
                                 std::optional<std::size_t> exclude) {
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(nodes.size());
  for (const auto& n : nodes) {
    if (exclude && n.id == *exclude) continue;
    order.emplace_back(distance(p, n.coord), n.id);
  }
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count),
                    order.end());
  std::vector<std::size_t> out(count);
  for (std::size_t t = 0; t < count; ++t) out[t] = order[t].second;
  return out;
}

}  // namespace

double norm(Vec2 v) { return std::hypot(v.x, v.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

bool KnnGraph::has_edge(std::size_t source, std::size_t target) const {
  if (target >= nodes_.size()) return false;
  const auto in = in_edges(target);
  return std::find(in.begin(), in.end(), source) != in.end();
}

KnnGraph build_knn_graph(std::span<const Location> locations, std::size_t k) {
  const std::size_t n = locations.size();
  if (n == 0) throw Error(ErrorCode::BadK, "cannot build a graph over zero locations");
  if (k < 1 || k > n - 1) {
    throw Error(ErrorCode::BadK, "k = " + std::to_string(k) + " outside [1, " +
                                     std::to_string(n - 1) + "]");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (locations[i].id != i) {
      throw Error(ErrorCode::BadLocationId, "location ids must be 0..n-1 in order");
    }
    require_finite(locations[i].coord);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance(locations[i].coord, locations[j].coord) <= kCoincidenceTolerance) {
        throw Error(ErrorCode::DuplicateLocation, "locations " + std::to_string(i) + " and " +
                                                      std::to_string(j) + " coincide");
      }
    }
  }

  KnnGraph g;
  g.nodes_.assign(locations.begin(), locations.end());
  g.k_ = k;
  g.sources_.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nn = nearest(locations, k, locations[i].coord, i);
    g.sources_.insert(g.sources_.end(), nn.begin(), nn.end());
  }
  return g;
}

KnnGraph augment_with_query(const KnnGraph& graph, Vec2 s) {
  require_finite(s);
  if (graph.query_id()) {
    throw Error(ErrorCode::BadConfig, "graph already carries a query node");
  }
  const std::size_t n = graph.size();
  std::span<const Location> seen(graph.nodes());

  KnnGraph g = graph;
  g.query_id_ = n;
  g.nodes_.push_back(Location{n, s});

  std::optional<std::size_t> coincident;
  for (const auto& node : seen) {
    if (distance(node.coord, s) < kCoincidenceTolerance) {
      coincident = node.id;
      break;
    }
  }
  if (coincident) {
    g.coincident_ = coincident;
    const auto in = graph.in_edges(*coincident);
    g.sources_.insert(g.sources_.end(), in.begin(), in.end());
  } else {
    const auto nn = nearest(seen, graph.k(), s, std::nullopt);
    g.sources_.insert(g.sources_.end(), nn.begin(), nn.end());
  }
  return g;
}

SignedAngle signed_angle(Vec2 v1, Vec2 v2) {
  const double n1 = norm(v1);
  const double n2 = norm(v2);
  if (!(n1 > 0.0) || !(n2 > 0.0)) {
    throw Error(ErrorCode::ZeroVector, "signed_angle of a zero-length vector");
  }
  const double cosine = std::clamp((v1.x / n1) * (v2.x / n2) + (v1.y / n1) * (v2.y / n2),
                                   -1.0, 1.0);
  const double cross = v1.x * v2.y - v1.y * v2.x;
  SignedAngle out;
  out.magnitude = std::acos(cosine);
  out.parity = (std::abs(cross) < 1e-12 || cross > 0.0) ? 1 : -1;
  return out;
}

EdgeRep edge_representation(const KnnGraph& graph, std::size_t target, std::size_t source) {
  if (!graph.has_edge(source, target)) {
    throw Error(ErrorCode::MissingEdge, "no edge " + std::to_string(source) + " -> " +
                                            std::to_string(target));
  }
  const Vec2 si = graph.coord(target);
  const Vec2 sj = graph.coord(source);
  const Vec2 s_ij = sj - si;

  // A coincident query stands in for its seen twin, which is excluded too.
  std::optional<std::size_t> twin;
  if (graph.query_id() && target == *graph.query_id()) twin = graph.coincident_with();

  EdgeRep rep{norm(s_ij), 0.0};
  bool found = false;
  std::size_t best_k = 0;
  for (std::size_t k : graph.in_edges(source)) {
    if (k == target || (twin && k == *twin)) continue;
    const SignedAngle a = signed_angle(s_ij, graph.coord(k) - sj);
    double lambda = a.parity * a.magnitude;
    if (lambda >= std::numbers::pi) lambda = -std::numbers::pi;

    bool better = !found;
    if (found) {
      const double cur = std::abs(rep.angle);
      const double cand = std::abs(lambda);
      if (cand < cur) {
        better = true;
      } else if (cand == cur) {
        if (lambda < 0.0 && rep.angle >= 0.0) {
          better = true;
        } else if ((lambda < 0.0) == (rep.angle < 0.0) && k < best_k) {
          better = true;
        }
      }
    }
    if (better) {
      rep.angle = lambda;
      best_k = k;
      found = true;
    }
  }
  return rep;
}

std::vector<EdgeRep> edge_representations(const KnnGraph& graph) {
  std::vector<EdgeRep> out;
  out.reserve(graph.sources().size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (std::size_t j : graph.in_edges(i)) out.push_back(edge_representation(graph, i, j));
  }
  return out;
}

double mean_seen_edge_length(const KnnGraph& graph) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < graph.num_seen(); ++i) {
    for (std::size_t j : graph.in_edges(i)) {
      total += distance(graph.coord(i), graph.coord(j));
      ++count;
    }
  }
  return count == 0 ? 1.0 : total / static_cast<double>(count);
}

}  // namespace spatialgen
