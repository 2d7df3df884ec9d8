#include "pprsim/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pprsim/generators.hpp"

namespace pprsim {

namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

template <typename T>
void take(const json& j, const char* key, std::optional<T>& dst) {
  if (j.contains(key)) {
    if (j.at(key).is_null()) {
      dst.reset();
    } else {
      dst = j.at(key).get<T>();
    }
  }
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json();
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Accuracy: return "accuracy";
    case ExperimentKind::Hops: return "hops";
    case ExperimentKind::Scenario: return "scenario";
  }
  return "?";
}

ExperimentKind parse_experiment(const std::string& s) {
  if (s == "accuracy") return ExperimentKind::Accuracy;
  if (s == "hops") return ExperimentKind::Hops;
  if (s == "scenario") return ExperimentKind::Scenario;
  throw UsageError("unknown experiment '" + s + "' (expected accuracy|hops|scenario)");
}

double RunConfig::effective_threshold() const {
  if (threshold) return *threshold;
  return vectors ? 0.6 : 0.4;
}

void RunConfig::resolve() {
  auto fail = [](const std::string& msg) { throw UsageError(msg); };

  if (experiment == ExperimentKind::Accuracy) {
    if (alphas.empty()) alphas = {0.1, 0.5, 0.9};
    if (radii.empty()) radii = {1, 2, 3, 4, 5};
    if (!iterations) iterations = 200;
  } else {
    if (alphas.size() > 1) fail("--alpha takes a single value for the " + to_string(experiment) + " experiment");
    if (alphas.empty()) alphas = {0.5};
    scenario.alpha = alphas.front();
    if (!radii.empty() && experiment != ExperimentKind::Accuracy) fail("--radii only applies to the accuracy experiment");
    if (experiment == ExperimentKind::Hops && !iterations) iterations = 500;
  }
  if (documents.empty()) {
    documents = experiment == ExperimentKind::Scenario ? std::vector<std::size_t>{10}
                                                       : std::vector<std::size_t>{10, 100, 1000, 10000};
  }
  if (experiment == ExperimentKind::Scenario) {
    if (documents.size() != 1) fail("--m takes a single value for the scenario experiment");
    scenario.documents = documents.front();
    if (iterations) fail("--iterations does not apply to the scenario experiment");
  } else if (save_embeddings || load_embeddings) {
    fail("--save-embeddings/--load-embeddings only apply to the scenario experiment");
  }

  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) fail("--alpha must be in (0, 1], got " + std::to_string(a));
  }
  for (auto m : documents) {
    if (m < 1) fail("--m must be >= 1");
  }
  for (auto r : radii) {
    if (r < 1) fail("--radii must be >= 1");
  }
  if (iterations && *iterations < 1) fail("--iterations must be >= 1");
  if (scenario.ttl < 1) fail("--ttl must be >= 1");
  if (scenario.k < 1) fail("--k must be >= 1");
  if (scenario.walks < 1) fail("--walks must be >= 1");
  if (scenario.num_queries < 1) fail("--num-queries must be >= 1");
  if (queries_per_iteration < 1) fail("--queries-per-iter must be >= 1");
  if (dim < 2) fail("--dim must be >= 2");
  if (synthetic_vocab < 1) fail("--synthetic-vocab must be >= 1");
  if (dataset_queries < 1) fail("--dataset-queries must be >= 1");
  if (synthetic_nodes < 3) fail("--synthetic-nodes must be >= 3");
  if (synthetic_degree % 2 != 0 || synthetic_degree >= synthetic_nodes) {
    fail("--synthetic-degree must be even and below the node count");
  }
  if (!(synthetic_rewire >= 0.0 && synthetic_rewire <= 1.0)) fail("--synthetic-rewire must be in [0, 1]");
  const double t = effective_threshold();
  if (!(t >= -1.0 && t <= 1.0)) fail("--threshold must be in [-1, 1]");
  if (!(scenario.diffusion.tol > 0.0)) fail("--tol must be positive");
  const double p = scenario.diffusion.schedule.contact_probability;
  if (!(p > 0.0 && p <= 1.0)) fail("--contact-prob must be in (0, 1]");
  if (scenario.diffusion.schedule.window < 1) fail("--window must be >= 1");
  threshold = t;
}

std::string to_json(const RunConfig& c) {
  const auto& s = c.scenario;
  json j = {{"experiment", to_string(c.experiment)},
            {"graph", opt(c.graph)},
            {"synthetic_nodes", c.synthetic_nodes},
            {"synthetic_degree", c.synthetic_degree},
            {"synthetic_rewire", c.synthetic_rewire},
            {"vectors", opt(c.vectors)},
            {"vector_limit", opt(c.vector_limit)},
            {"synthetic_vocab", c.synthetic_vocab},
            {"dim", c.dim},
            {"dataset_queries", c.dataset_queries},
            {"threshold", opt(c.threshold)},
            {"m", c.documents},
            {"alpha", c.alphas},
            {"radii", c.radii},
            {"iterations", opt(c.iterations)},
            {"queries_per_iteration", c.queries_per_iteration},
            {"num_queries", s.num_queries},
            {"ttl", s.ttl},
            {"k", s.k},
            {"walks", s.walks},
            {"seed", s.seed},
            {"normalization", to_string(s.normalization)},
            {"diffusion", to_string(s.diffusion.method)},
            {"tol", s.diffusion.tol},
            {"max_iters", s.diffusion.max_iters},
            {"window", s.diffusion.schedule.window},
            {"contact_probability", s.diffusion.schedule.contact_probability},
            {"max_ticks", s.diffusion.schedule.max_ticks},
            {"execution", to_string(c.exec)},
            {"format", to_string(c.format)},
            {"load_embeddings", opt(c.load_embeddings)}};
  return j.dump(2);
}

void apply_config_json(RunConfig& c, const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config file is not valid JSON: ") + e.what());
  }
  const json& j = root.contains("config") && root.at("config").is_object() ? root.at("config") : root;
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");

  static const std::vector<std::string> known = {
      "experiment", "graph", "synthetic_nodes", "synthetic_degree", "synthetic_rewire", "vectors",
      "vector_limit", "synthetic_vocab", "dim", "dataset_queries", "threshold", "m", "alpha",
      "radii", "iterations", "queries_per_iteration", "num_queries", "ttl", "k", "walks", "seed",
      "normalization", "diffusion", "tol", "max_iters", "window", "contact_probability",
      "max_ticks", "execution", "format", "load_embeddings"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("unknown config key '" + key + "'");
    }
  }

  try {
    auto& s = c.scenario;
    if (j.contains("experiment")) c.experiment = parse_experiment(j.at("experiment").get<std::string>());
    take(j, "graph", c.graph);
    take(j, "synthetic_nodes", c.synthetic_nodes);
    take(j, "synthetic_degree", c.synthetic_degree);
    take(j, "synthetic_rewire", c.synthetic_rewire);
    take(j, "vectors", c.vectors);
    take(j, "vector_limit", c.vector_limit);
    take(j, "synthetic_vocab", c.synthetic_vocab);
    take(j, "dim", c.dim);
    take(j, "dataset_queries", c.dataset_queries);
    take(j, "threshold", c.threshold);
    take(j, "m", c.documents);
    take(j, "alpha", c.alphas);
    take(j, "radii", c.radii);
    take(j, "iterations", c.iterations);
    take(j, "queries_per_iteration", c.queries_per_iteration);
    take(j, "num_queries", s.num_queries);
    take(j, "ttl", s.ttl);
    take(j, "k", s.k);
    take(j, "walks", s.walks);
    take(j, "seed", s.seed);
    if (j.contains("normalization")) s.normalization = parse_normalization(j.at("normalization").get<std::string>());
    if (j.contains("diffusion")) s.diffusion.method = parse_diffusion_method(j.at("diffusion").get<std::string>());
    take(j, "tol", s.diffusion.tol);
    take(j, "max_iters", s.diffusion.max_iters);
    take(j, "window", s.diffusion.schedule.window);
    take(j, "contact_probability", s.diffusion.schedule.contact_probability);
    take(j, "max_ticks", s.diffusion.schedule.max_ticks);
    if (j.contains("execution")) {
      c.exec = j.at("execution").get<std::string>() == "serial" ? Execution::Serial : Execution::Parallel;
    }
    if (j.contains("format")) c.format = parse_report_format(j.at("format").get<std::string>());
    take(j, "load_embeddings", c.load_embeddings);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
}

std::optional<RunConfig> parse_config(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Diffusion-guided P2P search simulator"};
  app.name("pprsim");

  std::string config_file, experiment, normalization, diffusion, format;
  std::string graph, vectors, out_path, trace, save_emb, load_emb;
  std::size_t synthetic_nodes = 0, synthetic_degree = 0, vector_limit = 0, synthetic_vocab = 0,
              dim = 0, dataset_queries = 0, ttl = 0, k = 0, walks = 0, iterations = 0,
              queries_per_iter = 0, num_queries = 0, window = 0, max_ticks = 0, max_iters = 0;
  double synthetic_rewire = 0, threshold = 0, tol = 0, contact = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> m_list, radii;
  std::vector<double> alpha_list;
  bool serial = false;

  app.add_option("--config", config_file, "JSON config file or run manifest");
  auto* o_experiment = app.add_option("--experiment", experiment, "accuracy | hops | scenario");
  auto* o_graph = app.add_option("--graph", graph, "SNAP edge-list file");
  auto* o_snodes = app.add_option("--synthetic-nodes", synthetic_nodes, "Watts-Strogatz node count (no --graph)");
  auto* o_sdeg = app.add_option("--synthetic-degree", synthetic_degree, "Watts-Strogatz lattice degree");
  auto* o_srew = app.add_option("--synthetic-rewire", synthetic_rewire, "Watts-Strogatz rewiring probability");
  auto* o_vectors = app.add_option("--vectors", vectors, "word2vec/GloVe text vectors");
  auto* o_vlimit = app.add_option("--vector-limit", vector_limit, "read only the first N vectors");
  auto* o_svocab = app.add_option("--synthetic-vocab", synthetic_vocab, "synthetic vocabulary size");
  auto* o_dim = app.add_option("--dim", dim, "synthetic embedding dimension");
  auto* o_dq = app.add_option("--dataset-queries", dataset_queries, "query/gold pairs to generate");
  auto* o_thr = app.add_option("--threshold", threshold, "minimum query/gold similarity");
  auto* o_m = app.add_option("--m", m_list, "documents stored in the network (list)")->delimiter(',');
  auto* o_alpha = app.add_option("--alpha", alpha_list, "teleport probability (list for accuracy)")->delimiter(',');
  auto* o_radii = app.add_option("--radii", radii, "query radii for the accuracy experiment")->delimiter(',');
  auto* o_ttl = app.add_option("--ttl", ttl, "query time-to-live in hops");
  auto* o_k = app.add_option("--k", k, "result list size");
  auto* o_walks = app.add_option("--walks", walks, "parallel walks per query");
  auto* o_iter = app.add_option("--iterations", iterations, "experiment iterations");
  auto* o_qpi = app.add_option("--queries-per-iter", queries_per_iter, "queries per hop-experiment iteration");
  auto* o_nq = app.add_option("--num-queries", num_queries, "queries in a scenario run");
  auto* o_seed = app.add_option("--seed", seed, "base random seed");
  auto* o_norm = app.add_option("--normalization", normalization, "column | symmetric");
  auto* o_diff = app.add_option("--diffusion", diffusion, "async | sync | closed");
  auto* o_tol = app.add_option("--tol", tol, "diffusion convergence tolerance (max-norm)");
  auto* o_maxit = app.add_option("--max-iters", max_iters, "synchronous iteration budget");
  auto* o_window = app.add_option("--window", window, "quiet ticks required for async convergence");
  auto* o_contact = app.add_option("--contact-prob", contact, "per-tick gossip contact probability");
  auto* o_maxticks = app.add_option("--max-ticks", max_ticks, "async tick budget");
  auto* o_serial = app.add_flag("--serial", serial, "run serial reference kernels");
  auto* o_out = app.add_option("--out", out_path, "report path (manifest written alongside)");
  auto* o_format = app.add_option("--format", format, "csv | json");
  auto* o_trace = app.add_option("--trace", trace, "JSON-lines message trace");
  auto* o_save = app.add_option("--save-embeddings", save_emb, "dump diffused embeddings (scenario)");
  auto* o_load = app.add_option("--load-embeddings", load_emb, "reuse dumped embeddings (scenario)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig c;
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw UsageError("cannot read config file " + config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_json(c, ss.str());
  }

  auto& s = c.scenario;
  try {
    if (*o_experiment) c.experiment = parse_experiment(experiment);
    if (*o_graph) c.graph = graph;
    if (*o_snodes) c.synthetic_nodes = synthetic_nodes;
    if (*o_sdeg) c.synthetic_degree = synthetic_degree;
    if (*o_srew) c.synthetic_rewire = synthetic_rewire;
    if (*o_vectors) c.vectors = vectors;
    if (*o_vlimit) c.vector_limit = vector_limit;
    if (*o_svocab) {
      c.synthetic_vocab = synthetic_vocab;
      c.vectors.reset();
    }
    if (*o_dim) c.dim = dim;
    if (*o_dq) c.dataset_queries = dataset_queries;
    if (*o_thr) c.threshold = threshold;
    if (*o_m) c.documents = m_list;
    if (*o_alpha) c.alphas = alpha_list;
    if (*o_radii) c.radii = radii;
    if (*o_ttl) s.ttl = ttl;
    if (*o_k) s.k = k;
    if (*o_walks) s.walks = walks;
    if (*o_iter) c.iterations = iterations;
    if (*o_qpi) c.queries_per_iteration = queries_per_iter;
    if (*o_nq) s.num_queries = num_queries;
    if (*o_seed) s.seed = seed;
    if (*o_norm) s.normalization = parse_normalization(normalization);
    if (*o_diff) s.diffusion.method = parse_diffusion_method(diffusion);
    if (*o_tol) s.diffusion.tol = tol;
    if (*o_maxit) s.diffusion.max_iters = max_iters;
    if (*o_window) s.diffusion.schedule.window = window;
    if (*o_contact) s.diffusion.schedule.contact_probability = contact;
    if (*o_maxticks) s.diffusion.schedule.max_ticks = max_ticks;
    if (*o_serial && serial) c.exec = Execution::Serial;
    if (*o_out) c.out = out_path;
    if (*o_format) c.format = parse_report_format(format);
    if (*o_trace) c.trace = trace;
    if (*o_save) c.save_embeddings = save_emb;
    if (*o_load) c.load_embeddings = load_emb;
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (c.graph && c.vectors && *o_svocab) throw UsageError("--vectors and --synthetic-vocab are exclusive");

  c.resolve();
  return c;
}

std::string resolve_data_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || std::filesystem::exists(p)) return path;
  if (const char* root = std::getenv("PPRSIM_DATA_DIR"); root && *root) {
    auto candidate = std::filesystem::path(root) / p;
    if (std::filesystem::exists(candidate)) return candidate.string();
  }
  return path;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::optional<RunConfig> parsed;
  try {
    parsed = parse_config(args, out);
  } catch (const UsageError& e) {
    err << "pprsim: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }
  if (!parsed) return 0;
  RunConfig& c = *parsed;
  auto& s = c.scenario;

  try {
    RunManifest manifest;
    manifest.seed = s.seed;

    std::shared_ptr<const OverlayGraph> graph;
    if (c.graph) {
      const auto path = resolve_data_path(*c.graph);
      graph = std::make_shared<const OverlayGraph>(load_edge_list(path));
      manifest.datasets.push_back(fingerprint_file("graph", path));
    } else {
      const auto graph_seed = derive_seed(s.seed, {0x67});
      graph = std::make_shared<const OverlayGraph>(generators::watts_strogatz(
          c.synthetic_nodes, c.synthetic_degree, c.synthetic_rewire, graph_seed));
      manifest.datasets.push_back({"graph",
                                   "watts-strogatz n=" + std::to_string(c.synthetic_nodes) +
                                       " k=" + std::to_string(c.synthetic_degree) +
                                       " beta=" + std::to_string(c.synthetic_rewire) +
                                       " seed=" + std::to_string(graph_seed),
                                   0, "", true});
    }

    std::shared_ptr<const EmbeddingStore> store;
    if (c.vectors) {
      const auto path = resolve_data_path(*c.vectors);
      store = std::make_shared<const EmbeddingStore>(load_vectors(path, c.vector_limit));
      manifest.datasets.push_back(fingerprint_file("vectors", path));
    } else {
      const auto store_seed = derive_seed(s.seed, {0x76});
      store = std::make_shared<const EmbeddingStore>(synthesize_store(c.synthetic_vocab, c.dim, store_seed));
      manifest.datasets.push_back({"vectors",
                                   "unit-sphere vocab=" + std::to_string(c.synthetic_vocab) +
                                       " dim=" + std::to_string(c.dim) +
                                       " seed=" + std::to_string(store_seed),
                                   0, "", true});
    }
    auto dataset = std::make_shared<const RetrievalDataset>(generate_dataset(
        store, c.dataset_queries, c.effective_threshold(), derive_seed(s.seed, {0xD5}), c.exec));

    Environment env(graph, dataset, s.normalization);
    s.diffusion.exec = c.exec;
    // Experiments validate against the pool before running.
    for (auto m : c.documents) {
      ScenarioConfig probe = s;
      probe.documents = m;
      for (double a : c.alphas) {
        probe.alpha = a;
        probe.validate(dataset->irrelevant_pool.size());
      }
    }

    std::ofstream trace_file;
    TraceFn trace_fn;
    if (c.trace) {
      trace_file.open(*c.trace);
      if (!trace_file) throw std::runtime_error("cannot write trace " + *c.trace);
      trace_fn = [&trace_file](std::string_view line) { trace_file << line << '\n'; };
    }
    const TraceFn* trace = c.trace ? &trace_fn : nullptr;

    std::string body;
    switch (c.experiment) {
      case ExperimentKind::Accuracy: {
        AccuracyExperiment exp{c.documents, c.alphas, c.radii, *c.iterations, c.exec};
        auto report = run_accuracy_experiment(env, s, exp, trace);
        body = c.format == ReportFormat::Csv ? to_csv(report) : to_json(report);
        break;
      }
      case ExperimentKind::Hops: {
        HopExperiment exp{c.documents, *c.iterations, c.queries_per_iteration, c.exec};
        auto report = run_hopcount_experiment(env, s, exp, trace);
        body = c.format == ReportFormat::Csv ? to_csv(report) : to_json(report);
        break;
      }
      case ExperimentKind::Scenario: {
        std::optional<DiffusedEmbeddings> preloaded;
        if (c.load_embeddings) {
          preloaded = load_embeddings(*c.load_embeddings);
          manifest.datasets.push_back(fingerprint_file("embeddings", *c.load_embeddings));
        }
        DiffusedEmbeddings diffused;
        auto result = run_scenario(env, s, trace, preloaded ? &*preloaded : nullptr, &diffused);
        if (c.save_embeddings) save_embeddings(*c.save_embeddings, diffused);
        body = c.format == ReportFormat::Csv ? to_csv(result) : to_json(result);
        break;
      }
    }

    manifest.config_json = to_json(c);
    if (c.out) {
      emit_report(body, manifest, *c.out);
      out << "wrote " << *c.out << " and " << manifest_path(*c.out).string() << "\n";
    } else {
      out << body;
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "pprsim: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "pprsim: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pprsim
