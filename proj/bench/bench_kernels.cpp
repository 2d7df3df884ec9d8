// Serial reference vs OpenMP kernels. Prints wall time per kernel and checks
// that both paths agree exactly.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pprsim/embeddings.hpp"
#include "pprsim/generators.hpp"
#include "pprsim/kernels.hpp"
#include "pprsim/simulator.hpp"

using namespace pprsim;
using Clock = std::chrono::steady_clock;

namespace {

template <typename F>
double time_ms(int reps, F&& f) {
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

void row(const char* name, double serial_ms, double omp_ms, bool same) {
  std::printf("%-22s %10.3f %10.3f %8.2fx  %s\n", name, serial_ms, omp_ms, serial_ms / omp_ms,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 20000;
  const std::size_t dim = 64;
  std::printf("threads=%d nodes=%zu dim=%zu\n", omp_get_max_threads(), n, dim);
  std::printf("%-22s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  const auto g = generators::watts_strogatz(n, 6, 0.1, 7);
  const TransitionMatrix A(g, Normalization::ColumnStochastic);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  RowMatrix in(n, dim), seed(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dim; ++c) {
      in(i, c) = gauss(rng);
      seed(i, c) = gauss(rng);
    }
  }
  RowMatrix out_s(n, dim), out_p(n, dim);
  double ds = 0, dp = 0;
  const double ts = time_ms(20, [&] { ds = kernels::serial::propagate(A, in, seed, 0.5, out_s); });
  const double tp = time_ms(20, [&] { dp = kernels::omp::propagate(A, in, seed, 0.5, out_p); });
  row("propagate", ts, tp, ds == dp && out_s == out_p);

  const auto store = synthesize_store(n, dim, 13);
  std::vector<std::uint8_t> excluded(n, 0);
  const auto q = store.vector(0);
  excluded[0] = 1;
  NearestHit hs{}, hp{};
  const double ns = time_ms(50, [&] { hs = kernels::serial::nearest(store.vectors(), q, excluded); });
  const double np = time_ms(50, [&] { hp = kernels::omp::nearest(store.vectors(), q, excluded); });
  row("nearest", ns, np, hs.index == hp.index && hs.score == hp.score);

  auto shared_store = std::make_shared<const EmbeddingStore>(synthesize_store(16000, dim, 3));
  auto dataset = std::make_shared<const RetrievalDataset>(
      generate_dataset(shared_store, 200, 0.4, 5, Execution::Parallel));
  auto graph = std::make_shared<const OverlayGraph>(generators::watts_strogatz(500, 6, 0.1, 9));
  const Environment env(graph, dataset);
  ScenarioConfig base;
  base.diffusion.method = DiffusionMethod::Synchronous;
  HopExperiment exp{{10, 100}, 40, 10, Execution::Serial};
  HopReport rs, rp;
  const double es = time_ms(1, [&] { rs = run_hopcount_experiment(env, base, exp); });
  exp.exec = Execution::Parallel;
  const double ep = time_ms(1, [&] { rp = run_hopcount_experiment(env, base, exp); });
  bool same = rs.rows.size() == rp.rows.size();
  for (std::size_t i = 0; same && i < rs.rows.size(); ++i) {
    same = rs.rows[i].success == rp.rows[i].success &&
           (rs.rows[i].hops.has_value() == rp.rows[i].hops.has_value()) &&
           (!rs.rows[i].hops || rs.rows[i].hops->mean == rp.rows[i].hops->mean);
  }
  row("hop iterations", es, ep, same);
  return 0;
}
