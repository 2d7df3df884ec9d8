#include "pprsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include "json.hpp"

namespace pprsim {

namespace {

// Stream tags so that scenario, accuracy and hop runs never share seeds.
constexpr std::uint64_t kScenarioStream = 0x5C;
constexpr std::uint64_t kAccuracyStream = 0xACC;
constexpr std::uint64_t kHopStream = 0x40F;

struct Envelope {
  enum class Kind { Query, Response };
  Kind kind;
  NodeId to;
  NodeId from;
  std::size_t query;
  std::size_t branch;
  std::size_t hop;
  QueryMessage q;
  ResponseMessage r;
};

void merge_results(std::vector<ResultEntry>& into, const std::vector<ResultEntry>& from,
                   std::size_t k) {
  for (const auto& e : from) {
    bool present = std::any_of(into.begin(), into.end(),
                               [&](const ResultEntry& x) { return x.doc == e.doc; });
    if (!present) into.push_back(e);
  }
  std::sort(into.begin(), into.end(), [](const ResultEntry& a, const ResultEntry& b) {
    return ranks_before({a.doc, a.score}, {b.doc, b.score});
  });
  if (into.size() > k) into.resize(k);
}

// Runs body(i) for i in [0, count), serially or with OpenMP. Exceptions are
// rethrown after the loop, lowest index first.
template <typename Body>
void for_each_iteration(std::size_t count, Execution exec, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void ScenarioConfig::validate(std::size_t pool_size) const {
  if (documents < 1) throw ConfigError("documents (M) must be >= 1");
  if (documents - 1 > pool_size) {
    throw ConfigError("M=" + std::to_string(documents) + " needs " +
                      std::to_string(documents - 1) + " irrelevant documents but the pool has " +
                      std::to_string(pool_size));
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must be in (0, 1], got " + std::to_string(alpha));
  }
  if (ttl < 1) throw ConfigError("ttl must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (walks < 1) throw ConfigError("walks must be >= 1");
  if (!(diffusion.tol > 0.0)) throw ConfigError("diffusion tolerance must be positive");
  const double p = diffusion.schedule.contact_probability;
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("contact probability must be in (0, 1]");
  if (diffusion.schedule.window < 1) throw ConfigError("convergence window must be >= 1");
}

Environment::Environment(std::shared_ptr<const OverlayGraph> g,
                         std::shared_ptr<const RetrievalDataset> d, Normalization mode)
    : graph(std::move(g)), dataset(std::move(d)), normalization(mode) {
  if (!graph || !dataset) throw std::invalid_argument("Environment: graph and dataset required");
  if (dataset->pair_count() == 0) throw std::invalid_argument("Environment: dataset has no pairs");
  transition = std::make_shared<const TransitionMatrix>(transition_matrix(*graph, mode));
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto s : stream) {
    words.push_back(static_cast<std::uint32_t>(s));
    words.push_back(static_cast<std::uint32_t>(s >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

std::vector<NodeId> place_documents(const OverlayGraph& g, std::size_t count, std::uint64_t seed) {
  if (g.node_count() == 0) throw std::invalid_argument("place_documents: empty graph");
  Rng rng(seed);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(g.node_count() - 1));
  std::vector<NodeId> holder(count);
  for (auto& h : holder) h = pick(rng);
  return holder;
}

DocumentSet prepare_documents(const Environment& env, std::size_t documents, std::uint64_t seed) {
  const auto& ds = *env.dataset;
  if (documents < 1) throw ConfigError("documents (M) must be >= 1");
  if (documents - 1 > ds.irrelevant_pool.size()) {
    throw ConfigError("M=" + std::to_string(documents) + " exceeds the irrelevant pool (" +
                      std::to_string(ds.irrelevant_pool.size()) + ")");
  }
  Rng rng(seed);
  DocumentSet set;
  set.pair = std::uniform_int_distribution<std::size_t>(0, ds.pair_count() - 1)(rng);
  set.tokens.reserve(documents);
  std::sample(ds.irrelevant_pool.begin(), ds.irrelevant_pool.end(), std::back_inserter(set.tokens),
              static_cast<std::ptrdiff_t>(documents - 1), rng);
  const auto gold_pos = std::uniform_int_distribution<std::size_t>(0, documents - 1)(rng);
  set.tokens.insert(set.tokens.begin() + static_cast<std::ptrdiff_t>(gold_pos), ds.gold[set.pair]);
  set.gold = static_cast<DocId>(gold_pos);
  set.holder = place_documents(*env.graph, documents, derive_seed(seed, {1}));
  return set;
}

SimulationResult simulate_queries(const Environment& env, const DocumentSet& docs,
                                  const QueryBatch& batch, const ScenarioConfig& cfg,
                                  std::uint64_t seed, const TraceFn* trace,
                                  const DiffusedEmbeddings* preloaded,
                                  DiffusedEmbeddings* diffused_out) {
  const OverlayGraph& g = *env.graph;
  const EmbeddingStore& store = *env.dataset->store;
  const std::size_t n = g.node_count();
  const std::size_t dim = store.dim();
  if (docs.tokens.size() != docs.holder.size()) {
    throw std::invalid_argument("simulate_queries: documents and holders differ in length");
  }

  std::vector<std::span<const double>> doc_vectors;
  doc_vectors.reserve(docs.tokens.size());
  for (auto t : docs.tokens) doc_vectors.push_back(store.vector(t));
  RowMatrix E0 = personalization_matrix(n, dim, doc_vectors, docs.holder);

  Diffusion diffusion;
  if (preloaded) {
    if (preloaded->rows.rows() != n || preloaded->rows.cols() != dim) {
      throw std::invalid_argument("preloaded embeddings have shape " +
                                  std::to_string(preloaded->rows.rows()) + "x" +
                                  std::to_string(preloaded->rows.cols()) + ", expected " +
                                  std::to_string(n) + "x" + std::to_string(dim));
    }
    diffusion.embeddings = *preloaded;
    diffusion.tables = NeighborTable(g, dim);
    diffusion.tables.fill_from(g, diffusion.embeddings.rows);
  } else {
    diffusion = diffuse(g, *env.transition, E0, cfg.alpha, cfg.diffusion, derive_seed(seed, {1}));
  }
  if (diffused_out) *diffused_out = diffusion.embeddings;

  std::vector<NodeState> nodes(n);
  for (NodeId u = 0; u < n; ++u) {
    nodes[u].id = u;
    nodes[u].neighbors = g.neighbors(u);
    nodes[u].personalization = E0.row(u);
    nodes[u].diffused = diffusion.embeddings.rows.row(u);
    nodes[u].neighbor_table = &diffusion.tables;
  }
  for (std::size_t i = 0; i < docs.tokens.size(); ++i) {
    nodes[docs.holder[i]].local_docs.push_back({static_cast<DocId>(i), doc_vectors[i]});
  }

  SimulationResult result;
  result.stats.diffusion_iterations = diffusion.embeddings.iterations;
  result.records.resize(batch.origins.size());
  std::vector<std::size_t> pending(batch.origins.size(), 1);
  Rng rng(derive_seed(seed, {2}));
  const auto query_vector = env.dataset->query_vector(docs.pair);
  std::size_t tick = 0;

  auto emit = [&](const char* event, NodeId from, NodeId to, const std::string& message) {
    if (!trace) return;
    nlohmann::json j = {{"run", batch.label}, {"tick", tick},       {"event", event},
                        {"from", from},       {"to", to},           {"message", nlohmann::json::parse(message)}};
    (*trace)(j.dump());
  };

  std::vector<Envelope> in_flight;

  auto deliver = [&](std::size_t qi, NodeId at, const ResponseMessage& r) {
    auto& rec = result.records[qi];
    merge_results(rec.results, r.results, cfg.k);
    ++rec.deliveries;
    ++result.stats.deliveries;
    --pending[qi];
    if (pending[qi] == 0) {
      rec.success = std::any_of(rec.results.begin(), rec.results.end(),
                                [&](const ResultEntry& e) { return e.doc == docs.gold; });
    }
    emit("deliver", at, at, to_json(r));
  };

  auto on_query = [&](std::size_t qi, std::size_t branch, std::size_t hop, NodeId at,
                      std::optional<NodeId> arrival, QueryMessage& q) {
    auto decision = handle_query(nodes[at], q, arrival, rng);
    auto& rec = result.records[qi];
    if (q.contains(docs.gold) && (!rec.first_hit_hop || hop < *rec.first_hit_hop)) {
      rec.first_hit_hop = hop;
    }
    if (decision.forwards()) {
      if (!arrival) pending[qi] = decision.next_hops.size();
      for (std::size_t b = 0; b < decision.next_hops.size(); ++b) {
        NodeId next = decision.next_hops[b];
        ++rec.forward_hops;
        ++result.stats.forwards;
        emit("forward", at, next, to_json(q));
        in_flight.push_back({Envelope::Kind::Query, next, at, qi, arrival ? branch : b, hop + 1, q, {}});
      }
      return;
    }
    ResponseMessage r = make_response(nodes[at], q);
    if (r.reverse_path.empty()) {
      deliver(qi, at, r);
      return;
    }
    NodeId back = r.reverse_path.back();
    ++rec.backtrack_hops;
    ++result.stats.backtracks;
    emit("backtrack", at, back, to_json(r));
    in_flight.push_back({Envelope::Kind::Response, back, at, qi, branch, hop, {}, std::move(r)});
  };

  for (std::size_t qi = 0; qi < batch.origins.size(); ++qi) {
    NodeId origin = batch.origins[qi];
    if (origin >= n) throw std::out_of_range("simulate_queries: origin out of range");
    result.records[qi].origin = origin;
    QueryMessage q;
    q.query_id = qi;
    q.embedding.assign(query_vector.begin(), query_vector.end());
    q.ttl = cfg.ttl;
    q.k = cfg.k;
    q.walks = cfg.walks;
    on_query(qi, 0, 0, origin, std::nullopt, q);
  }

  // Every message either advances one hop per tick or is consumed, so the
  // loop ends within one forward sweep plus one backtrack sweep.
  const std::size_t tick_limit = 2 * cfg.ttl + 4;
  while (!in_flight.empty() && tick < tick_limit) {
    ++tick;
    std::vector<Envelope> current;
    current.swap(in_flight);
    std::stable_sort(current.begin(), current.end(), [](const Envelope& a, const Envelope& b) {
      if (a.to != b.to) return a.to < b.to;
      if (a.query != b.query) return a.query < b.query;
      return a.branch < b.branch;
    });
    for (auto& env_msg : current) {
      if (env_msg.kind == Envelope::Kind::Query) {
        on_query(env_msg.query, env_msg.branch, env_msg.hop, env_msg.to, env_msg.from, env_msg.q);
        continue;
      }
      auto next = handle_response(nodes[env_msg.to], env_msg.r);
      if (!next) {
        deliver(env_msg.query, env_msg.to, env_msg.r);
        continue;
      }
      ++result.records[env_msg.query].backtrack_hops;
      ++result.stats.backtracks;
      emit("backtrack", env_msg.to, *next, to_json(env_msg.r));
      env_msg.from = env_msg.to;
      env_msg.to = *next;
      in_flight.push_back(std::move(env_msg));
    }
  }
  result.stats.ticks = tick;
  result.stats.in_flight = in_flight.size();
  if (!in_flight.empty()) {
    throw std::logic_error("event loop did not drain within " + std::to_string(tick_limit) +
                           " ticks");
  }
  return result;
}

SimulationResult run_scenario(const Environment& env, const ScenarioConfig& cfg,
                              const TraceFn* trace, const DiffusedEmbeddings* preloaded,
                              DiffusedEmbeddings* diffused_out) {
  cfg.validate(env.dataset->irrelevant_pool.size());
  DocumentSet docs = prepare_documents(env, cfg.documents, derive_seed(cfg.seed, {kScenarioStream, 0}));
  Rng rng(derive_seed(cfg.seed, {kScenarioStream, 1}));
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(env.graph->node_count() - 1));
  std::vector<NodeId> origins(cfg.num_queries);
  for (auto& o : origins) o = pick(rng);
  QueryBatch batch{origins, "scenario"};
  return simulate_queries(env, docs, batch, cfg, derive_seed(cfg.seed, {kScenarioStream, 2}),
                          trace, preloaded, diffused_out);
}

Stats compute_stats(std::span<const std::size_t> samples) {
  if (samples.empty()) throw std::invalid_argument("compute_stats: no samples");
  std::vector<std::size_t> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  Stats s;
  s.median = sorted[(sorted.size() - 1) / 2];
  const double count = static_cast<double>(sorted.size());
  double sum = 0.0;
  for (auto x : sorted) sum += static_cast<double>(x);
  s.mean = sum / count;
  double sq = 0.0;
  for (auto x : sorted) {
    const double d = static_cast<double>(x) - s.mean;
    sq += d * d;
  }
  s.stddev = std::sqrt(sq / count);
  return s;
}

const AccuracyCell* AccuracyReport::find(std::size_t documents, double alpha,
                                         std::size_t radius) const {
  for (const auto& c : cells) {
    if (c.documents == documents && c.alpha == alpha && c.radius == radius) return &c;
  }
  return nullptr;
}

namespace {

std::string run_label(const char* experiment, std::size_t documents, double alpha,
                      std::size_t iteration) {
  nlohmann::json j = {{"experiment", experiment},
                      {"M", documents},
                      {"alpha", alpha},
                      {"iteration", iteration}};
  return j.dump();
}

// Collects trace lines per iteration so parallel runs emit them in order.
struct TraceBuffer {
  std::vector<std::vector<std::string>> lines;
  std::vector<TraceFn> sinks;

  TraceBuffer(std::size_t iterations, bool enabled) {
    if (!enabled) return;
    lines.resize(iterations);
    for (std::size_t i = 0; i < iterations; ++i) {
      sinks.emplace_back([this, i](std::string_view s) { lines[i].emplace_back(s); });
    }
  }
  const TraceFn* sink(std::size_t i) const { return sinks.empty() ? nullptr : &sinks[i]; }
  void flush(const TraceFn* trace) {
    if (!trace) return;
    for (auto& it : lines) {
      for (auto& l : it) (*trace)(l);
      it.clear();
    }
  }
};

}  // namespace

AccuracyReport run_accuracy_experiment(const Environment& env, const ScenarioConfig& base,
                                       const AccuracyExperiment& exp, const TraceFn* trace) {
  const OverlayGraph& g = *env.graph;
  for (auto m : exp.documents) {
    ScenarioConfig cfg = base;
    cfg.documents = m;
    for (double a : exp.alphas) {
      cfg.alpha = a;
      cfg.validate(env.dataset->irrelevant_pool.size());
    }
  }
  for (auto r : exp.radii) {
    if (r == 0) throw ConfigError("radius 0 is not a search; radii must be >= 1");
  }

  const std::size_t A = exp.alphas.size();
  const std::size_t R = exp.radii.size();
  AccuracyReport report;

  for (std::size_t m : exp.documents) {
    // hits/samples per iteration, indexed [alpha][radius].
    std::vector<std::vector<std::size_t>> hits(exp.iterations, std::vector<std::size_t>(A * R, 0));
    std::vector<std::vector<std::size_t>> samples(exp.iterations, std::vector<std::size_t>(A * R, 0));
    TraceBuffer buffer(exp.iterations, trace != nullptr);

    for_each_iteration(exp.iterations, exp.exec, [&](std::size_t it) {
      const std::uint64_t s = derive_seed(base.seed, {kAccuracyStream, m, it});
      DocumentSet docs = prepare_documents(env, m, derive_seed(s, {0}));
      const auto dist = bfs_distances(g, docs.holder[docs.gold]);

      Rng rng(derive_seed(s, {1}));
      std::vector<NodeId> origins;
      std::vector<std::size_t> radius_index;
      for (std::size_t ri = 0; ri < R; ++ri) {
        std::vector<NodeId> ring;
        for (NodeId u = 0; u < g.node_count(); ++u) {
          if (dist[u] == exp.radii[ri]) ring.push_back(u);
        }
        if (ring.empty()) continue;
        origins.push_back(ring[std::uniform_int_distribution<std::size_t>(0, ring.size() - 1)(rng)]);
        radius_index.push_back(ri);
      }
      if (origins.empty()) return;

      for (std::size_t ai = 0; ai < A; ++ai) {
        ScenarioConfig cfg = base;
        cfg.documents = m;
        cfg.alpha = exp.alphas[ai];
        QueryBatch batch{origins, run_label("accuracy", m, cfg.alpha, it)};
        auto result = simulate_queries(env, docs, batch, cfg, derive_seed(s, {2}), buffer.sink(it));
        for (std::size_t q = 0; q < origins.size(); ++q) {
          const std::size_t cell = ai * R + radius_index[q];
          ++samples[it][cell];
          if (result.records[q].success) ++hits[it][cell];
        }
      }
    });
    buffer.flush(trace);

    for (std::size_t ai = 0; ai < A; ++ai) {
      for (std::size_t ri = 0; ri < R; ++ri) {
        AccuracyCell cell{m, exp.alphas[ai], exp.radii[ri], 0, 0};
        for (std::size_t it = 0; it < exp.iterations; ++it) {
          cell.hits += hits[it][ai * R + ri];
          cell.samples += samples[it][ai * R + ri];
        }
        if (cell.samples > 0) report.cells.push_back(cell);
      }
    }
  }
  return report;
}

HopReport run_hopcount_experiment(const Environment& env, const ScenarioConfig& base,
                                  const HopExperiment& exp, const TraceFn* trace) {
  const OverlayGraph& g = *env.graph;
  for (auto m : exp.documents) {
    ScenarioConfig cfg = base;
    cfg.documents = m;
    cfg.validate(env.dataset->irrelevant_pool.size());
  }

  HopReport report;
  for (std::size_t m : exp.documents) {
    std::vector<std::vector<QueryRecord>> per_iteration(exp.iterations);
    TraceBuffer buffer(exp.iterations, trace != nullptr);

    for_each_iteration(exp.iterations, exp.exec, [&](std::size_t it) {
      const std::uint64_t s = derive_seed(base.seed, {kHopStream, m, it});
      DocumentSet docs = prepare_documents(env, m, derive_seed(s, {0}));
      Rng rng(derive_seed(s, {1}));
      std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(g.node_count() - 1));
      std::vector<NodeId> origins(exp.queries_per_iteration);
      for (auto& o : origins) o = pick(rng);

      ScenarioConfig cfg = base;
      cfg.documents = m;
      QueryBatch batch{origins, run_label("hops", m, cfg.alpha, it)};
      per_iteration[it] =
          simulate_queries(env, docs, batch, cfg, derive_seed(s, {2}), buffer.sink(it)).records;
    });
    buffer.flush(trace);

    HopRow row;
    row.documents = m;
    row.alpha = base.alpha;
    std::vector<std::size_t> hops;
    for (const auto& records : per_iteration) {
      for (const auto& r : records) {
        ++row.total;
        if (r.success) {
          ++row.success;
          hops.push_back(*r.first_hit_hop);
        }
      }
    }
    if (!hops.empty()) row.hops = compute_stats(hops);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace pprsim
