#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pprsim {

using NodeId = std::uint32_t;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  /// 1-based line number, 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Immutable undirected simple graph with dense node ids 0..N-1.
class OverlayGraph {
 public:
  /// Builds from an arbitrary edge list over dense ids. Self-loops are dropped,
  /// duplicate and reversed pairs are merged.
  static OverlayGraph from_edges(std::size_t node_count,
                                 std::span<const std::pair<NodeId, NodeId>> edges);
  /// Same, keeping the caller's original id for each dense id.
  static OverlayGraph from_edges(std::size_t node_count,
                                 std::span<const std::pair<NodeId, NodeId>> edges,
                                 std::vector<std::uint64_t> original_ids);

  std::size_t node_count() const { return offsets_.size() - 1; }
  std::size_t edge_count() const { return edges_.size(); }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {adjacency_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }
  bool has_edge(NodeId u, NodeId v) const;

  /// Position of v inside neighbors(u), if adjacent.
  std::optional<std::size_t> neighbor_slot(NodeId u, NodeId v) const;

  /// Unordered edges as (min, max) pairs, sorted.
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

  /// CSR offsets into the flattened adjacency; offsets()[u] is the first slot of u.
  std::span<const std::size_t> offsets() const { return offsets_; }

  /// Original id from the input file for each dense id (identity for
  /// generated graphs).
  const std::vector<std::uint64_t>& original_ids() const { return original_ids_; }

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::uint64_t> original_ids_;
};

/// Reads a SNAP-style edge list: one "u v" pair per line, '#' comments and
/// blank lines skipped. Ids are remapped to 0..N-1 in order of first appearance.
OverlayGraph load_edge_list(const std::filesystem::path& path);

/// Parses edge-list text already in memory. Same rules as load_edge_list.
OverlayGraph parse_edge_list(const std::string& text);

enum class Normalization { ColumnStochastic, Symmetric };

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& s);

/// Sparse transition operator stored in CSR form with the graph's adjacency as
/// the sparsity pattern. Row u holds entries A[u][v] for v in neighbors(u).
class TransitionMatrix {
 public:
  TransitionMatrix(const OverlayGraph& g, Normalization mode);

  Normalization mode() const { return mode_; }
  std::size_t size() const { return offsets_.size() - 1; }

  std::span<const NodeId> row_columns(NodeId u) const {
    return {columns_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::span<const double> row_values(NodeId u) const {
    return {values_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }

  /// Entry lookup; zero when (u,v) is not an edge.
  double at(NodeId u, NodeId v) const;

  /// Dense copy, row-major. Only for small graphs in tests.
  std::vector<double> to_dense() const;

 private:
  Normalization mode_;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> columns_;
  std::vector<double> values_;
};

TransitionMatrix transition_matrix(const OverlayGraph& g,
                                   Normalization mode = Normalization::ColumnStochastic);

/// BFS hop count from src to dst; nullopt when unreachable.
std::optional<std::size_t> hop_distance(const OverlayGraph& g, NodeId src, NodeId dst);

inline constexpr std::size_t kUnreachable = static_cast<std::size_t>(-1);

/// BFS hop counts from src to every node, kUnreachable where disconnected.
std::vector<std::size_t> bfs_distances(const OverlayGraph& g, NodeId src);

}  // namespace pprsim
