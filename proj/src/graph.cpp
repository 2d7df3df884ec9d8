#include "pprsim/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace pprsim {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

// Splits on whitespace without allocating per token.
std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::optional<std::uint64_t> parse_id(std::string_view tok) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return value;
}

OverlayGraph parse_stream(std::istream& in, const std::string& source) {
  std::unordered_map<std::uint64_t, NodeId> dense;
  std::vector<std::uint64_t> original;
  std::vector<std::pair<NodeId, NodeId>> edges;

  auto intern = [&](std::uint64_t id) {
    auto [it, inserted] = dense.try_emplace(id, static_cast<NodeId>(original.size()));
    if (inserted) original.push_back(id);
    return it->second;
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (tokens.size() != 2) {
      throw ParseError(source + ":" + std::to_string(lineno) +
                           ": expected two node ids, found " + std::to_string(tokens.size()) +
                           " fields",
                       lineno);
    }
    auto u = parse_id(tokens[0]);
    auto v = parse_id(tokens[1]);
    if (!u || !v) {
      throw ParseError(source + ":" + std::to_string(lineno) + ": node ids must be non-negative integers",
                       lineno);
    }
    NodeId du = intern(*u);
    NodeId dv = intern(*v);
    edges.emplace_back(du, dv);
  }
  if (original.empty()) throw ParseError(source + ": edge list contains no nodes", 0);

  const std::size_t n = original.size();
  return OverlayGraph::from_edges(n, edges, std::move(original));
}

}  // namespace

OverlayGraph OverlayGraph::from_edges(std::size_t node_count,
                                      std::span<const std::pair<NodeId, NodeId>> edges) {
  OverlayGraph g;
  std::vector<std::pair<NodeId, NodeId>> canon;
  canon.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u >= node_count || v >= node_count) {
      throw std::out_of_range("edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") references a node outside [0, " + std::to_string(node_count) + ")");
    }
    if (u == v) continue;
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  std::vector<std::size_t> degree(node_count, 0);
  for (auto [u, v] : canon) {
    ++degree[u];
    ++degree[v];
  }
  g.offsets_.assign(node_count + 1, 0);
  for (std::size_t u = 0; u < node_count; ++u) g.offsets_[u + 1] = g.offsets_[u] + degree[u];
  g.adjacency_.resize(g.offsets_.back());
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (auto [u, v] : canon) {
    g.adjacency_[cursor[u]++] = v;
    g.adjacency_[cursor[v]++] = u;
  }
  for (std::size_t u = 0; u < node_count; ++u) {
    std::sort(g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[u]),
              g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[u + 1]));
  }
  g.edges_ = std::move(canon);
  g.original_ids_.resize(node_count);
  for (std::size_t u = 0; u < node_count; ++u) g.original_ids_[u] = u;
  return g;
}

OverlayGraph OverlayGraph::from_edges(std::size_t node_count,
                                      std::span<const std::pair<NodeId, NodeId>> edges,
                                      std::vector<std::uint64_t> original_ids) {
  if (original_ids.size() != node_count) {
    throw std::invalid_argument("from_edges: original id table has wrong length");
  }
  OverlayGraph g = from_edges(node_count, edges);
  g.original_ids_ = std::move(original_ids);
  return g;
}

bool OverlayGraph::has_edge(NodeId u, NodeId v) const {
  return neighbor_slot(u, v).has_value();
}

std::optional<std::size_t> OverlayGraph::neighbor_slot(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  auto it = std::lower_bound(nb.begin(), nb.end(), v);
  if (it == nb.end() || *it != v) return std::nullopt;
  return static_cast<std::size_t>(it - nb.begin());
}

OverlayGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path.string());
  return parse_stream(in, path.string());
}

OverlayGraph parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  return parse_stream(in, "<memory>");
}

std::string to_string(Normalization n) {
  return n == Normalization::ColumnStochastic ? "column" : "symmetric";
}

Normalization parse_normalization(const std::string& s) {
  if (s == "column" || s == "column-stochastic") return Normalization::ColumnStochastic;
  if (s == "symmetric") return Normalization::Symmetric;
  throw std::invalid_argument("unknown normalization '" + s + "' (expected column|symmetric)");
}

TransitionMatrix::TransitionMatrix(const OverlayGraph& g, Normalization mode)
    : mode_(mode), offsets_(g.offsets().begin(), g.offsets().end()) {
  const std::size_t n = g.node_count();
  columns_.reserve(offsets_.back());
  values_.reserve(offsets_.back());
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v : g.neighbors(u)) {
      columns_.push_back(v);
      double w = mode == Normalization::ColumnStochastic
                     ? 1.0 / static_cast<double>(g.degree(v))
                     : 1.0 / std::sqrt(static_cast<double>(g.degree(u)) *
                                       static_cast<double>(g.degree(v)));
      values_.push_back(w);
    }
  }
}

double TransitionMatrix::at(NodeId u, NodeId v) const {
  auto cols = row_columns(u);
  auto it = std::lower_bound(cols.begin(), cols.end(), v);
  if (it == cols.end() || *it != v) return 0.0;
  return row_values(u)[static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> TransitionMatrix::to_dense() const {
  const std::size_t n = size();
  std::vector<double> dense(n * n, 0.0);
  for (NodeId u = 0; u < n; ++u) {
    auto cols = row_columns(u);
    auto vals = row_values(u);
    for (std::size_t i = 0; i < cols.size(); ++i) dense[u * n + cols[i]] = vals[i];
  }
  return dense;
}

TransitionMatrix transition_matrix(const OverlayGraph& g, Normalization mode) {
  if (g.node_count() == 0) throw std::invalid_argument("transition_matrix: empty graph");
  return TransitionMatrix(g, mode);
}

std::vector<std::size_t> bfs_distances(const OverlayGraph& g, NodeId src) {
  if (src >= g.node_count()) throw std::out_of_range("bfs: invalid node id " + std::to_string(src));
  std::vector<std::size_t> dist(g.node_count(), kUnreachable);
  std::queue<NodeId> frontier;
  dist[src] = 0;
  frontier.push(src);
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : g.neighbors(u)) {
      if (dist[v] == kUnreachable) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  return dist;
}

std::optional<std::size_t> hop_distance(const OverlayGraph& g, NodeId src, NodeId dst) {
  if (dst >= g.node_count()) throw std::out_of_range("hop_distance: invalid node id " + std::to_string(dst));
  auto d = bfs_distances(g, src)[dst];
  if (d == kUnreachable) return std::nullopt;
  return d;
}

}  // namespace pprsim
