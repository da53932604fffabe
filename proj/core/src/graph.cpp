#include "qute/graph.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "qute/error.hpp"

namespace qute {

Graph::Graph(std::size_t node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  for (auto& [a, b] : edges_) {
    if (a == b) {
      throw std::invalid_argument("self-loop at node " + std::to_string(a));
    }
    if (a >= node_count_ || b >= node_count_) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    if (a > b) std::swap(a, b);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  std::vector<std::size_t> degree(node_count_, 0);
  for (const auto& [a, b] : edges_) {
    ++degree[a];
    ++degree[b];
  }
  offsets_.assign(node_count_ + 1, 0);
  for (std::size_t v = 0; v < node_count_; ++v) {
    offsets_[v + 1] = offsets_[v] + degree[v];
  }
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [a, b] : edges_) {
    adjacency_[cursor[a]++] = b;
    adjacency_[cursor[b]++] = a;
  }
  for (std::size_t v = 0; v < node_count_; ++v) {
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
  }
}

std::span<const NodeId> Graph::neighbors(NodeId node) const {
  if (node >= node_count_) throw std::out_of_range("invalid node id");
  return std::span<const NodeId>(adjacency_).subspan(
      offsets_[node], offsets_[node + 1] - offsets_[node]);
}

bool Graph::has_edge(NodeId a, NodeId b) const {
  if (a >= node_count_ || b >= node_count_) return false;
  const auto adj = neighbors(a);
  return std::binary_search(adj.begin(), adj.end(), b);
}

GraphSchedule::GraphSchedule(Graph base, std::vector<Graph> per_round)
    : base_(std::move(base)), per_round_(std::move(per_round)) {
  for (const auto& g : per_round_) {
    if (g.node_count() != base_.node_count()) {
      throw std::invalid_argument(
          "scheduled graph node count differs from the base graph");
    }
  }
}

const Graph& GraphSchedule::at_round(std::size_t round) const noexcept {
  if (per_round_.empty()) return base_;
  return per_round_[std::min(round, per_round_.size() - 1)];
}

ConnectivityMatrix::ConnectivityMatrix(std::size_t node_count,
                                       std::vector<double> probs)
    : node_count_(node_count), probs_(std::move(probs)) {
  if (probs_.size() != node_count_ * node_count_) {
    throw std::invalid_argument("connectivity matrix is not square");
  }
  for (std::size_t a = 0; a < node_count_; ++a) {
    for (std::size_t b = 0; b < node_count_; ++b) {
      const double v = probs_[a * node_count_ + b];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("connectivity probability outside [0, 1]");
      }
      if (a == b && v != 0.0) {
        throw std::invalid_argument("connectivity diagonal must be zero");
      }
      if (v != probs_[b * node_count_ + a]) {
        throw std::invalid_argument("connectivity matrix is not symmetric");
      }
    }
  }
}

Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("erdos_renyi needs n >= 1");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::out_of_range("edge probability outside [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<Graph::Edge> edges;
  edges.reserve(static_cast<std::size_t>(p * n * (n - 1) / 2.0) + 16);
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      if (coin(rng)) edges.emplace_back(a, b);
    }
  }
  return Graph(n, std::move(edges));
}

Graph grid(std::size_t m, std::size_t n) {
  if (m == 0 || n == 0) throw std::invalid_argument("grid needs m, n >= 1");
  std::vector<Graph::Edge> edges;
  edges.reserve(m * (n - 1) + n * (m - 1));
  const auto id = [n](std::size_t x, std::size_t y) {
    return static_cast<NodeId>(x * n + y);
  };
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      if (y + 1 < n) edges.emplace_back(id(x, y), id(x, y + 1));
      if (x + 1 < m) edges.emplace_back(id(x, y), id(x + 1, y));
    }
  }
  return Graph(m * n, std::move(edges));
}

Graph star(std::size_t n) {
  std::vector<Graph::Edge> edges;
  for (NodeId v = 1; v < n; ++v) edges.emplace_back(0, v);
  return Graph(n, std::move(edges));
}

Graph clique(std::size_t n) {
  std::vector<Graph::Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  }
  return Graph(n, std::move(edges));
}

Graph empty_graph(std::size_t n) { return Graph(n); }

Graph path(std::size_t n) {
  std::vector<Graph::Edge> edges;
  for (NodeId v = 1; v < n; ++v) edges.emplace_back(v - 1, v);
  return Graph(n, std::move(edges));
}

namespace {

// Depth-limited BFS. Stops expanding once `limit` hops are reached.
std::vector<std::size_t> bfs(const Graph& g, NodeId source,
                             std::size_t limit) {
  if (source >= g.node_count()) throw std::out_of_range("invalid node id");
  std::vector<std::size_t> dist(g.node_count(), kUnreachable);
  std::deque<NodeId> frontier{source};
  dist[source] = 0;
  while (!frontier.empty()) {
    const NodeId v = frontier.front();
    frontier.pop_front();
    if (dist[v] >= limit) continue;
    for (const NodeId w : g.neighbors(v)) {
      if (dist[w] == kUnreachable) {
        dist[w] = dist[v] + 1;
        frontier.push_back(w);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<std::size_t> distances_from(const Graph& g, NodeId source) {
  return bfs(g, source, kUnreachable);
}

std::vector<NodeId> ball(const Graph& g, NodeId center, std::size_t radius) {
  const auto dist = bfs(g, center, radius);
  std::vector<NodeId> out;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (dist[v] <= radius) out.push_back(v);
  }
  return out;
}

std::size_t eccentricity(const Graph& g, NodeId node) {
  const auto dist = distances_from(g, node);
  return *std::max_element(dist.begin(), dist.end());
}

std::size_t diameter(const Graph& g) {
  std::size_t best = 0;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    best = std::max(best, eccentricity(g, v));
    if (best == kUnreachable) break;
  }
  return best;
}

std::size_t radius(const Graph& g) {
  std::size_t best = kUnreachable;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const std::size_t e = eccentricity(g, v);
    if (e == kUnreachable) return kUnreachable;
    best = std::min(best, e);
  }
  return best;
}

bool is_connected(const Graph& g) {
  if (g.node_count() == 0) return true;
  return eccentricity(g, 0) != kUnreachable;
}

Graph threshold_graph(const ConnectivityMatrix& cm, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::out_of_range("gamma outside [0, 1]");
  }
  std::vector<Graph::Edge> edges;
  for (NodeId a = 0; a < cm.node_count(); ++a) {
    for (NodeId b = a + 1; b < cm.node_count(); ++b) {
      if (cm.at(a, b) > gamma) edges.emplace_back(a, b);
    }
  }
  return Graph(cm.node_count(), std::move(edges));
}

bool is_edge_subgraph(const Graph& small, const Graph& big) {
  if (small.node_count() != big.node_count()) {
    throw std::invalid_argument("graphs have different node counts");
  }
  return std::includes(big.edges().begin(), big.edges().end(),
                       small.edges().begin(), small.edges().end());
}

std::vector<std::size_t> degree_sequence(const Graph& g) {
  std::vector<std::size_t> out;
  out.reserve(g.node_count());
  for (NodeId v = 0; v < g.node_count(); ++v) out.push_back(g.degree(v));
  std::sort(out.begin(), out.end());
  return out;
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "nodes " << g.node_count() << '\n';
  for (const auto& [a, b] : g.edges()) out << a << ' ' << b << '\n';
}

Graph read_edge_list(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> nodes;
  std::vector<Graph::Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    if (!nodes) {
      std::string keyword;
      std::size_t n = 0;
      if (!(row >> keyword >> n) || keyword != "nodes") {
        throw FormatError("line " + std::to_string(line_no) +
                          ": expected `nodes <n>` header");
      }
      nodes = n;
      continue;
    }
    long long a = -1;
    long long b = -1;
    std::string rest;
    if (!(row >> a >> b) || (row >> rest) || a < 0 || b < 0) {
      throw FormatError("line " + std::to_string(line_no) +
                        ": expected `u v` edge");
    }
    edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  }
  if (!nodes) throw FormatError("missing `nodes <n>` header");
  try {
    return Graph(*nodes, std::move(edges));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

}  // namespace qute
