#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace spatialgen {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);

/// A planar point with its node index. Latitude/longitude inputs are mapped to
/// (lon, lat) before they get here.
struct Location {
  std::size_t id = 0;
  Vec2 coord;
};

/// Distance and signed turning angle of a directed edge. angle lies in [-pi, pi).
struct EdgeRep {
  double length = 0.0;
  double angle = 0.0;
};

/// Directed K-nearest-neighbour graph. Every seen node has exactly k in-edges,
/// sorted by (distance, id). An optional query node has k in-edges from seen
/// nodes and no out-edges.
class KnnGraph {
 public:
  const std::vector<Location>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t num_seen() const noexcept { return query_id_ ? nodes_.size() - 1 : nodes_.size(); }
  std::size_t k() const noexcept { return k_; }
  Vec2 coord(std::size_t i) const { return nodes_.at(i).coord; }

  /// Sources of the edges pointing at node i.
  std::span<const std::size_t> in_edges(std::size_t i) const {
    return std::span<const std::size_t>(sources_).subspan(i * k_, k_);
  }
  /// All sources, node-major: entry i * k + t is the t-th neighbour of node i.
  std::span<const std::size_t> sources() const noexcept { return sources_; }

  std::optional<std::size_t> query_id() const noexcept { return query_id_; }
  /// Seen node sharing the query's coordinate, if any.
  std::optional<std::size_t> coincident_with() const noexcept { return coincident_; }

  bool has_edge(std::size_t source, std::size_t target) const;

 private:
  friend KnnGraph build_knn_graph(std::span<const Location>, std::size_t);
  friend KnnGraph augment_with_query(const KnnGraph&, Vec2);

  std::vector<Location> nodes_;
  std::size_t k_ = 0;
  std::vector<std::size_t> sources_;
  std::optional<std::size_t> query_id_;
  std::optional<std::size_t> coincident_;
};

/// Two coordinates closer than this are the same place.
inline constexpr double kCoincidenceTolerance = 1e-12;

/// Exact O(n^2) construction. Ties in distance go to the lower node id.
/// Throws DuplicateLocation, BadK, NonFinite or BadLocationId.
KnnGraph build_knn_graph(std::span<const Location> locations, std::size_t k);

/// Adds `s` as a query node fed by its k nearest seen nodes. A query within
/// kCoincidenceTolerance of a seen node copies that node's in-edge sources.
KnnGraph augment_with_query(const KnnGraph& graph, Vec2 s);

struct SignedAngle {
  double magnitude = 0.0;  // in [0, pi]
  int parity = 1;          // +1 or -1
};

/// Unsigned angle between v1 and v2 and the orientation of the turn from v1 to
/// v2 (sign of the z-component of v1 x v2; +1 when nearly colinear).
SignedAngle signed_angle(Vec2 v1, Vec2 v2);

/// (length, angle) of edge source -> target. The angle is the smallest-magnitude
/// signed turn from (target -> source) onto (source -> k) over the source's own
/// in-neighbours k, excluding the target; 0 if there are none.
EdgeRep edge_representation(const KnnGraph& graph, std::size_t target, std::size_t source);

/// Edge representations for every in-edge, in the node-major order of `sources()`.
std::vector<EdgeRep> edge_representations(const KnnGraph& graph);

/// Mean length of the edges into seen nodes.
double mean_seen_edge_length(const KnnGraph& graph);

}  // namespace spatialgen
