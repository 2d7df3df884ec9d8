#pragma once

// Independent oracles shared by the unit and acceptance tests. Nothing here
// calls into the library's solvers.

#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pprsim/embeddings.hpp"
#include "pprsim/graph.hpp"
#include "pprsim/matrix.hpp"

namespace testsupport {

/// Dense column-stochastic or symmetric operator built straight from the
/// adjacency definition.
inline std::vector<double> dense_transition(const pprsim::OverlayGraph& g,
                                            pprsim::Normalization mode) {
  const std::size_t n = g.node_count();
  std::vector<double> A(n * n, 0.0);
  for (pprsim::NodeId u = 0; u < n; ++u) {
    for (pprsim::NodeId v = 0; v < n; ++v) {
      if (!g.has_edge(u, v)) continue;
      const double du = static_cast<double>(g.degree(u));
      const double dv = static_cast<double>(g.degree(v));
      A[u * n + v] = mode == pprsim::Normalization::ColumnStochastic ? 1.0 / dv
                                                                     : 1.0 / std::sqrt(du * dv);
    }
  }
  return A;
}

/// Solves (I − (1−a)A)·X = a·B with partial-pivot Gaussian elimination.
inline pprsim::RowMatrix dense_ppr(const std::vector<double>& A, const pprsim::RowMatrix& B,
                                   double a) {
  const std::size_t n = B.rows();
  const std::size_t m = B.cols();
  std::vector<double> M(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) M[i * n + j] = (i == j ? 1.0 : 0.0) - (1.0 - a) * A[i * n + j];
  }
  pprsim::RowMatrix X(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m; ++c) X(i, c) = a * B(i, c);
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(M[r * n + col]) > std::abs(M[piv * n + col])) piv = r;
    }
    if (M[piv * n + col] == 0.0) throw std::runtime_error("dense_ppr: singular system");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(M[col * n + j], M[piv * n + j]);
      for (std::size_t c = 0; c < m; ++c) std::swap(X(col, c), X(piv, c));
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = M[r * n + col] / M[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) M[r * n + j] -= f * M[col * n + j];
      for (std::size_t c = 0; c < m; ++c) X(r, c) -= f * X(col, c);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m; ++c) X(i, c) /= M[i * n + i];
  }
  return X;
}

inline pprsim::RowMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  pprsim::RowMatrix X(rows, cols);
  for (auto& x : X.data()) x = gauss(rng);
  return X;
}

/// BFS by repeated frontier expansion over an adjacency matrix.
inline std::vector<std::size_t> frontier_distances(const pprsim::OverlayGraph& g, pprsim::NodeId src) {
  const std::size_t n = g.node_count();
  std::vector<std::size_t> d(n, pprsim::kUnreachable);
  d[src] = 0;
  for (std::size_t level = 0; level < n; ++level) {
    bool grew = false;
    for (pprsim::NodeId u = 0; u < n; ++u) {
      if (d[u] != level) continue;
      for (pprsim::NodeId v = 0; v < n; ++v) {
        if (d[v] == pprsim::kUnreachable && g.has_edge(u, v)) {
          d[v] = level + 1;
          grew = true;
        }
      }
    }
    if (!grew) break;
  }
  return d;
}

/// Small store and dataset for simulator-level tests.
inline std::shared_ptr<const pprsim::RetrievalDataset> small_dataset(std::size_t vocab, std::size_t dim,
                                                                     std::size_t pairs, double threshold,
                                                                     std::uint64_t seed) {
  auto store = std::make_shared<const pprsim::EmbeddingStore>(pprsim::synthesize_store(vocab, dim, seed));
  return std::make_shared<const pprsim::RetrievalDataset>(
      pprsim::generate_dataset(store, pairs, threshold, seed + 1));
}

}  // namespace testsupport
