#include "pprsim/generators.hpp"

#include <random>
#include <set>
#include <stdexcept>

namespace pprsim::generators {

using Edge = std::pair<NodeId, NodeId>;

OverlayGraph watts_strogatz(std::size_t n, std::size_t k, double beta, std::uint64_t seed) {
  if (k % 2 != 0 || k >= n) throw std::invalid_argument("watts_strogatz: k must be even and < n");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));

  std::set<Edge> edges;
  auto key = [](NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; };
  for (NodeId u = 0; u < n; ++u) {
    for (std::size_t j = 1; j <= k / 2; ++j) edges.insert(key(u, static_cast<NodeId>((u + j) % n)));
  }
  // Rewire in lattice order so the result depends only on the seed.
  for (std::size_t j = 1; j <= k / 2; ++j) {
    for (NodeId u = 0; u < n; ++u) {
      auto v = static_cast<NodeId>((u + j) % n);
      if (coin(rng) >= beta) continue;
      auto it = edges.find(key(u, v));
      if (it == edges.end()) continue;
      NodeId w = pick(rng);
      if (w == u || edges.count(key(u, w)) != 0) continue;
      edges.erase(it);
      edges.insert(key(u, w));
    }
  }
  std::vector<Edge> list(edges.begin(), edges.end());
  return OverlayGraph::from_edges(n, list);
}

OverlayGraph random_connected(std::size_t n, double extra_edge_prob, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("random_connected: n must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Edge> list;
  for (NodeId u = 1; u < n; ++u) {
    std::uniform_int_distribution<NodeId> parent(0, u - 1);
    list.emplace_back(parent(rng), u);
  }
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (coin(rng) < extra_edge_prob) list.emplace_back(u, v);
    }
  }
  return OverlayGraph::from_edges(n, list);
}

OverlayGraph path(std::size_t n) {
  std::vector<Edge> list;
  for (NodeId u = 0; u + 1 < n; ++u) list.emplace_back(u, u + 1);
  return OverlayGraph::from_edges(n, list);
}

OverlayGraph ring(std::size_t n) {
  std::vector<Edge> list;
  for (NodeId u = 0; u < n; ++u) list.emplace_back(u, static_cast<NodeId>((u + 1) % n));
  return OverlayGraph::from_edges(n, list);
}

OverlayGraph star(std::size_t leaves) {
  std::vector<Edge> list;
  for (NodeId u = 1; u <= leaves; ++u) list.emplace_back(0, u);
  return OverlayGraph::from_edges(leaves + 1, list);
}

}  // namespace pprsim::generators
