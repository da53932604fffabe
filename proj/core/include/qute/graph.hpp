#pragma once

// Undirected graphs, the generator families used by the experiments, and the
// BFS queries (balls, eccentricity) the protocol analysis relies on.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "qute/multiple_testing.hpp"

namespace qute {

/// Distance marker for unreachable nodes and disconnected graphs.
inline constexpr std::size_t kUnreachable =
    std::numeric_limits<std::size_t>::max();

class Graph {
 public:
  /// Unordered pair stored with first < second.
  using Edge = std::pair<NodeId, NodeId>;

  /// Normalizes endpoint order and drops duplicates. Throws
  /// std::invalid_argument on self-loops or out-of-range endpoints.
  explicit Graph(std::size_t node_count, std::vector<Edge> edges = {});

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Ascending neighbor ids.
  std::span<const NodeId> neighbors(NodeId node) const;
  std::size_t degree(NodeId node) const { return neighbors(node).size(); }
  bool has_edge(NodeId a, NodeId b) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t node_count_;
  std::vector<Edge> edges_;
  // CSR adjacency: neighbors of v are adjacency_[offsets_[v] .. offsets_[v+1]).
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> adjacency_;
};

/// A topology that may change every round. Rounds past the end of the
/// sequence reuse the last entry; an empty sequence means the base graph is
/// active in every round.
class GraphSchedule {
 public:
  explicit GraphSchedule(Graph base, std::vector<Graph> per_round = {});

  const Graph& base() const noexcept { return base_; }
  std::size_t node_count() const noexcept { return base_.node_count(); }
  const Graph& at_round(std::size_t round) const noexcept;
  bool is_static() const noexcept { return per_round_.empty(); }

 private:
  Graph base_;
  std::vector<Graph> per_round_;
};

/// Symmetric matrix of pairwise link probabilities with a zero diagonal.
class ConnectivityMatrix {
 public:
  /// `probs` is row-major, node_count x node_count. Throws
  /// std::invalid_argument when it is not square, not symmetric, has a
  /// nonzero diagonal, or holds values outside [0, 1].
  ConnectivityMatrix(std::size_t node_count, std::vector<double> probs);

  std::size_t node_count() const noexcept { return node_count_; }
  double at(NodeId a, NodeId b) const {
    return probs_[static_cast<std::size_t>(a) * node_count_ + b];
  }

 private:
  std::size_t node_count_;
  std::vector<double> probs_;
};

/// G(n, p): every pair present independently with probability p.
Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed);
/// m x n lattice; the node at (x, y) has id x * n + y.
Graph grid(std::size_t m, std::size_t n);
/// Node 0 is the center.
Graph star(std::size_t n);
Graph clique(std::size_t n);
Graph empty_graph(std::size_t n);
/// 0 - 1 - ... - (n-1).
Graph path(std::size_t n);

/// BFS hop distances from `source`; kUnreachable where there is no path.
std::vector<std::size_t> distances_from(const Graph& g, NodeId source);

/// Nodes within `radius` hops of `center`, ascending. Includes the center.
std::vector<NodeId> ball(const Graph& g, NodeId center, std::size_t radius);

std::size_t eccentricity(const Graph& g, NodeId node);
/// Max eccentricity; kUnreachable when disconnected.
std::size_t diameter(const Graph& g);
/// Min eccentricity; kUnreachable when disconnected.
std::size_t radius(const Graph& g);
bool is_connected(const Graph& g);

/// Edge (a, b) iff probs(a, b) > gamma.
Graph threshold_graph(const ConnectivityMatrix& cm, double gamma);

/// True iff edges(small) is a subset of edges(big). Throws
/// std::invalid_argument when node counts differ.
bool is_edge_subgraph(const Graph& small, const Graph& big);

std::vector<std::size_t> degree_sequence(const Graph& g);

// Edge-list text format: a `nodes <n>` header, then one `u v` pair per line.
// Blank lines and lines starting with '#' are ignored on read.
void write_edge_list(std::ostream& out, const Graph& g);
Graph read_edge_list(std::istream& in);

}  // namespace qute
