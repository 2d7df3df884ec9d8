#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pprsim/graph.hpp"
#include "pprsim/kernels.hpp"
#include "pprsim/matrix.hpp"

namespace pprsim {

/// Sum of a node's document embeddings (not re-normalized). All inputs must
/// have length dim; an empty collection gives the zero vector.
std::vector<double> personalization_vector(std::span<const std::span<const double>> docs,
                                           std::size_t dim);

/// One personalization row per node: row u is the sum of the embeddings whose
/// holder[i] == u.
RowMatrix personalization_matrix(std::size_t node_count, std::size_t dim,
                                 std::span<const std::span<const double>> docs,
                                 std::span<const NodeId> holder);

enum class DiffusionMethod { Closed, Synchronous, Asynchronous };

std::string to_string(DiffusionMethod m);
DiffusionMethod parse_diffusion_method(const std::string& s);

struct DiffusedEmbeddings {
  RowMatrix rows;
  double alpha = 1.0;
  DiffusionMethod method = DiffusionMethod::Closed;
  /// Solver iterations (synchronous) or gossip ticks (asynchronous); 0 for closed form.
  std::size_t iterations = 0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, std::vector<double> trace = {})
      : std::runtime_error(what), residual_(residual), trace_(std::move(trace)) {}
  double residual() const { return residual_; }
  /// Per-iteration (or per-tick) max update norms leading up to the failure.
  const std::vector<double>& trace() const { return trace_; }

 private:
  double residual_;
  std::vector<double> trace_;
};

/// ‖E − (1−a)·A·E − a·E0‖_∞.
double fixed_point_residual(const TransitionMatrix& A, const RowMatrix& E0, const RowMatrix& E,
                            double alpha);

/// Direct sparse solve of (I − (1−a)A)·E = a·E0, one right-hand side per
/// embedding dimension. Limited to 20,000 nodes.
DiffusedEmbeddings ppr_closed_form(const TransitionMatrix& A, const RowMatrix& E0, double alpha);

/// Power iteration E(t) = (1−a)·A·E(t−1) + a·E0 from E(0) = E0, until the
/// max-norm update drops below tol. update_trace, when given, receives every
/// iteration's update norm.
DiffusedEmbeddings ppr_synchronous(const TransitionMatrix& A, const RowMatrix& E0, double alpha,
                                   double tol, std::size_t max_iters,
                                   Execution exec = Execution::Parallel,
                                   std::vector<double>* update_trace = nullptr);

/// Each node's last-received copy of its neighbors' embeddings. Slots follow
/// the order of OverlayGraph::neighbors(u); a neighbor never heard from reads
/// as the zero vector.
class NeighborTable {
 public:
  NeighborTable() = default;
  NeighborTable(const OverlayGraph& g, std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t node_count() const { return offsets_.size() - 1; }
  std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }

  std::span<const double> latest(NodeId u, std::size_t slot) const {
    return {values_.data() + (offsets_[u] + slot) * dim_, dim_};
  }
  bool known(NodeId u, std::size_t slot) const { return known_[offsets_[u] + slot] != 0; }

  /// u stores embedding as the latest value of its neighbor at slot.
  void record(NodeId u, std::size_t slot, std::span<const double> embedding);

  /// Every node learns every neighbor's row of E exactly.
  void fill_from(const OverlayGraph& g, const RowMatrix& E);

 private:
  std::size_t dim_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<double> values_;
  std::vector<std::uint8_t> known_;
};

/// e_u ← (1−a)·Σ_v A[u][v]·latest(u, v) + a·e0_u. Writes into e_u and returns
/// the max-norm change.
double ppr_async_step(NodeId u, const NeighborTable& table, const TransitionMatrix& A,
                      std::span<const double> e0_row, double alpha, std::span<double> e_u);

struct ScheduleConfig {
  /// Per-tick probability that a node initiates an exchange.
  double contact_probability = 1.0;
  /// Consecutive quiet ticks required to declare convergence.
  std::size_t window = 5;
  std::size_t max_ticks = 200000;
};

struct AsyncDiffusion {
  DiffusedEmbeddings embeddings;
  NeighborTable tables;
  std::vector<double> update_trace;
};

/// Pairwise gossip: every tick, each node (in id order) with probability p
/// contacts one uniform random neighbor; the two swap current embeddings and
/// both re-run ppr_async_step. Converged after `window` consecutive ticks whose
/// largest per-node update is below tol.
AsyncDiffusion run_async_diffusion(const OverlayGraph& g, const TransitionMatrix& A,
                                   const RowMatrix& E0, double alpha,
                                   const ScheduleConfig& schedule, double tol,
                                   std::uint64_t seed);

struct DiffusionConfig {
  DiffusionMethod method = DiffusionMethod::Asynchronous;
  double tol = 1e-6;
  std::size_t max_iters = 100000;
  ScheduleConfig schedule;
  Execution exec = Execution::Parallel;
};

struct Diffusion {
  DiffusedEmbeddings embeddings;
  NeighborTable tables;
};

/// Runs the configured method. For the closed form and synchronous methods the
/// neighbor tables are filled with the exact result.
Diffusion diffuse(const OverlayGraph& g, const TransitionMatrix& A, const RowMatrix& E0,
                  double alpha, const DiffusionConfig& cfg, std::uint64_t seed);

/// Binary dump, or CSV when the path ends in ".csv".
void save_embeddings(const std::filesystem::path& path, const DiffusedEmbeddings& e);
DiffusedEmbeddings load_embeddings(const std::filesystem::path& path);

}  // namespace pprsim
