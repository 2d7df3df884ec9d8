#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pprsim/report.hpp"
#include "pprsim/simulator.hpp"

namespace pprsim {

/// Bad command line or configuration; the CLI exits with status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Accuracy, Hops, Scenario };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment(const std::string& s);

struct RunConfig {
  ExperimentKind experiment = ExperimentKind::Hops;

  // Graph: an edge-list file, or a Watts-Strogatz graph when no file is given.
  std::optional<std::string> graph;
  std::size_t synthetic_nodes = 500;
  std::size_t synthetic_degree = 10;
  double synthetic_rewire = 0.1;

  // Vectors: a word-vector file, or a synthetic unit-sphere store.
  std::optional<std::string> vectors;
  std::optional<std::size_t> vector_limit;
  std::size_t synthetic_vocab = 16000;
  std::size_t dim = 64;

  std::size_t dataset_queries = 1000;
  /// Gold similarity threshold; 0.6 for real vectors, 0.4 for synthetic ones.
  std::optional<double> threshold;

  std::vector<std::size_t> documents;
  std::vector<double> alphas;
  std::vector<std::size_t> radii;
  std::optional<std::size_t> iterations;
  std::size_t queries_per_iteration = 10;

  ScenarioConfig scenario;
  Execution exec = Execution::Parallel;

  std::optional<std::string> out;
  ReportFormat format = ReportFormat::Csv;
  std::optional<std::string> trace;
  std::optional<std::string> save_embeddings;
  std::optional<std::string> load_embeddings;

  /// Fills experiment-dependent defaults (M list, alphas, radii, iterations,
  /// threshold) and validates ranges. Throws UsageError.
  void resolve();

  double effective_threshold() const;
};

/// JSON form of the resolved config; accepted back by --config.
std::string to_json(const RunConfig& cfg);
/// Applies the keys present in a config object (or a manifest's "config"
/// member) on top of cfg.
void apply_config_json(RunConfig& cfg, const std::string& json_text);

/// Defaults, then --config file, then explicit flags. args excludes argv[0].
/// Returns nullopt when help was requested (help text written to out).
std::optional<RunConfig> parse_config(const std::vector<std::string>& args, std::ostream& out);

/// Resolves a dataset path against $PPRSIM_DATA_DIR when it is relative and
/// does not exist as given.
std::string resolve_data_path(const std::string& path);

/// Whole command: parse, load data, run, emit. Returns the process exit code
/// (0 success, 1 runtime/IO failure, 2 usage error).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pprsim
