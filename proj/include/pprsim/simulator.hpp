#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pprsim/diffusion.hpp"
#include "pprsim/embeddings.hpp"
#include "pprsim/graph.hpp"
#include "pprsim/protocol.hpp"

namespace pprsim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Placement { Uniform };

struct ScenarioConfig {
  /// Documents stored in the network (one gold + documents-1 irrelevant).
  std::size_t documents = 10;
  double alpha = 0.5;
  std::size_t ttl = 50;
  std::size_t k = 1;
  std::size_t walks = 1;
  /// Queries issued by run_scenario.
  std::size_t num_queries = 10;
  Placement placement = Placement::Uniform;
  std::uint64_t seed = 1;
  Normalization normalization = Normalization::ColumnStochastic;
  DiffusionConfig diffusion;

  /// Throws ConfigError on out-of-range values; pool_size bounds documents-1.
  void validate(std::size_t pool_size) const;
};

/// Graph, its transition operator, and the retrieval dataset shared by every
/// iteration of an experiment.
struct Environment {
  std::shared_ptr<const OverlayGraph> graph;
  std::shared_ptr<const RetrievalDataset> dataset;
  Normalization normalization = Normalization::ColumnStochastic;
  std::shared_ptr<const TransitionMatrix> transition;

  Environment(std::shared_ptr<const OverlayGraph> g, std::shared_ptr<const RetrievalDataset> d,
              Normalization mode = Normalization::ColumnStochastic);
};

/// Mixes a base seed with stream identifiers (experiment, M index, iteration...)
/// into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

/// i.i.d. uniform holder node for each of `count` documents.
std::vector<NodeId> place_documents(const OverlayGraph& g, std::size_t count, std::uint64_t seed);

/// The documents stored during one iteration. Doc ids are positions in
/// `tokens`; the gold sits at a random position.
struct DocumentSet {
  std::size_t pair = 0;
  std::vector<std::size_t> tokens;
  DocId gold = 0;
  std::vector<NodeId> holder;
};

/// Picks a query/gold pair, documents-1 distinct irrelevant tokens and a
/// uniform placement.
DocumentSet prepare_documents(const Environment& env, std::size_t documents, std::uint64_t seed);

struct QueryRecord {
  NodeId origin = 0;
  bool success = false;
  /// Forward hops after which the gold first appeared in the results.
  std::optional<std::size_t> first_hit_hop;
  std::size_t forward_hops = 0;
  std::size_t backtrack_hops = 0;
  std::size_t deliveries = 0;
  std::vector<ResultEntry> results;
};

struct SimulationStats {
  std::size_t ticks = 0;
  std::size_t forwards = 0;
  std::size_t backtracks = 0;
  std::size_t deliveries = 0;
  /// Messages still queued when the loop stopped; zero after a clean drain.
  std::size_t in_flight = 0;
  std::size_t diffusion_iterations = 0;
};

struct SimulationResult {
  std::vector<QueryRecord> records;
  SimulationStats stats;
};

/// Receives one JSON line per message event.
using TraceFn = std::function<void(std::string_view)>;

struct QueryBatch {
  std::span<const NodeId> origins;
  /// Tag copied into every trace line ("run" field).
  std::string label;
};

/// Personalizes, diffuses and runs one batch of concurrent queries (all for
/// the set's query) through the tick-based event loop until every response
/// has returned. preloaded replaces the diffusion step when given.
SimulationResult simulate_queries(const Environment& env, const DocumentSet& docs,
                                  const QueryBatch& batch, const ScenarioConfig& cfg,
                                  std::uint64_t seed, const TraceFn* trace = nullptr,
                                  const DiffusedEmbeddings* preloaded = nullptr,
                                  DiffusedEmbeddings* diffused_out = nullptr);

/// One full pipeline run from cfg.seed: prepare documents, diffuse, issue
/// cfg.num_queries queries from uniform random origins.
SimulationResult run_scenario(const Environment& env, const ScenarioConfig& cfg,
                              const TraceFn* trace = nullptr,
                              const DiffusedEmbeddings* preloaded = nullptr,
                              DiffusedEmbeddings* diffused_out = nullptr);

struct Stats {
  std::size_t median = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Lower-middle median, mean, population standard deviation.
Stats compute_stats(std::span<const std::size_t> samples);

struct AccuracyCell {
  std::size_t documents = 0;
  double alpha = 0.0;
  std::size_t radius = 0;
  std::size_t hits = 0;
  std::size_t samples = 0;
  double accuracy() const { return static_cast<double>(hits) / static_cast<double>(samples); }
};

struct AccuracyReport {
  std::vector<AccuracyCell> cells;
  const AccuracyCell* find(std::size_t documents, double alpha, std::size_t radius) const;
};

struct HopRow {
  std::size_t documents = 0;
  double alpha = 0.0;
  std::size_t success = 0;
  std::size_t total = 0;
  /// Absent when no query succeeded.
  std::optional<Stats> hops;
};

struct HopReport {
  std::vector<HopRow> rows;
};

struct AccuracyExperiment {
  std::vector<std::size_t> documents{10, 100, 1000, 10000};
  std::vector<double> alphas{0.1, 0.5, 0.9};
  std::vector<std::size_t> radii{1, 2, 3, 4, 5};
  std::size_t iterations = 200;
  Execution exec = Execution::Parallel;
};

struct HopExperiment {
  std::vector<std::size_t> documents{10, 100, 1000, 10000};
  std::size_t iterations = 500;
  std::size_t queries_per_iteration = 10;
  Execution exec = Execution::Parallel;
};

/// Each iteration stores 1 gold + M-1 irrelevant documents, then queries from
/// one random node at each radius from the gold holder. Placement and origins
/// are shared across the alpha values of an iteration.
AccuracyReport run_accuracy_experiment(const Environment& env, const ScenarioConfig& base,
                                       const AccuracyExperiment& exp,
                                       const TraceFn* trace = nullptr);

/// Each iteration stores 1 gold + M-1 irrelevant documents and issues
/// queries_per_iteration queries from uniform random origins, at base.alpha.
HopReport run_hopcount_experiment(const Environment& env, const ScenarioConfig& base,
                                  const HopExperiment& exp, const TraceFn* trace = nullptr);

}  // namespace pprsim
