#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "pprsim/diffusion.hpp"
#include "pprsim/embeddings.hpp"
#include "pprsim/generators.hpp"
#include "support.hpp"

using namespace pprsim;

namespace {

double row_norm(const RowMatrix& m, std::size_t r) {
  double s = 0;
  for (double x : m.row(r)) s += x * x;
  return std::sqrt(s);
}

RowMatrix sum(const RowMatrix& a, const RowMatrix& b) {
  RowMatrix out = a;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

}  // namespace

TEST_SUITE("diffusion") {

TEST_CASE("personalization vectors are raw sums") {
  std::vector<double> x{1, 0}, y{0, 1};
  CHECK(personalization_vector({}, 2) == std::vector<double>{0, 0});
  std::vector<std::span<const double>> one{x};
  CHECK(personalization_vector(one, 2) == x);
  std::vector<std::span<const double>> both{x, y};
  auto p = personalization_vector(both, 2);
  CHECK(p == std::vector<double>{1, 1});
  std::vector<double> q{0.28, -0.96};
  CHECK(score(q, p) == doctest::Approx(score(q, x) + score(q, y)));
  std::vector<double> z{1, 2, 3};
  std::vector<std::span<const double>> bad{x, z};
  CHECK_THROWS(personalization_vector(bad, 2));
}

TEST_CASE("personalization matrix groups documents by holder") {
  std::vector<double> x{1, 0}, y{0, 1};
  std::vector<std::span<const double>> docs{x, y, x};
  std::vector<NodeId> holder{2, 0, 2};
  auto E0 = personalization_matrix(3, 2, docs, holder);
  CHECK(E0(0, 0) == 0.0);
  CHECK(E0(0, 1) == 1.0);
  CHECK(E0(1, 0) == 0.0);
  CHECK(E0(1, 1) == 0.0);
  CHECK(E0(2, 0) == 2.0);
}

TEST_CASE("closed form on a single edge") {
  auto g = generators::path(2);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  RowMatrix E0(2, 1);
  E0(0, 0) = 1.0;
  auto E = ppr_closed_form(A, E0, 0.5);
  CHECK(E.rows(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(E.rows(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(E.method == DiffusionMethod::Closed);
}

TEST_CASE("closed form with a=1 returns the personalization") {
  std::mt19937_64 rng(1);
  auto g = generators::random_connected(30, 0.1, 1);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  auto E0 = testsupport::random_matrix(30, 3, rng);
  CHECK(max_abs_diff(ppr_closed_form(A, E0, 1.0).rows, E0) == 0.0);
  CHECK_THROWS(ppr_closed_form(A, E0, 0.0));
  CHECK_THROWS(ppr_closed_form(A, E0, 1.5));
}

TEST_CASE("closed form agrees with dense elimination in both modes") {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto g = generators::random_connected(40, 0.08, seed);
    for (auto mode : {Normalization::ColumnStochastic, Normalization::Symmetric}) {
      TransitionMatrix A(g, mode);
      auto E0 = testsupport::random_matrix(40, 4, rng);
      for (double a : {0.1, 0.5, 0.9}) {
        auto want = testsupport::dense_ppr(testsupport::dense_transition(g, mode), E0, a);
        auto got = ppr_closed_form(A, E0, a);
        CHECK(max_abs_diff(got.rows, want) < 1e-10);
        CHECK(fixed_point_residual(A, E0, got.rows, a) < 1e-10);
      }
    }
  }
}

TEST_CASE("column-stochastic diffusion conserves mass") {
  std::mt19937_64 rng(3);
  auto g = generators::watts_strogatz(80, 4, 0.2, 3);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  auto E0 = testsupport::random_matrix(80, 5, rng);
  auto before = column_sums(E0);
  for (double a : {0.1, 0.5, 0.9}) {
    auto after = column_sums(ppr_closed_form(A, E0, a).rows);
    for (std::size_t c = 0; c < before.size(); ++c) CHECK(std::abs(after[c] - before[c]) < 1e-9);
  }
}

TEST_CASE("isolated nodes keep a times their personalization") {
  auto g = OverlayGraph::from_edges(3, std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  RowMatrix E0(3, 2);
  E0(2, 0) = 4.0;
  E0(2, 1) = -2.0;
  for (auto method : {DiffusionMethod::Closed, DiffusionMethod::Synchronous, DiffusionMethod::Asynchronous}) {
    DiffusionConfig cfg;
    cfg.method = method;
    cfg.tol = 1e-12;
    auto d = diffuse(g, A, E0, 0.3, cfg, 1);
    CHECK(d.embeddings.rows(2, 0) == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(d.embeddings.rows(2, 1) == doctest::Approx(-0.6).epsilon(1e-12));
  }

  auto single = OverlayGraph::from_edges(1, std::vector<std::pair<NodeId, NodeId>>{});
  TransitionMatrix A1(single, Normalization::ColumnStochastic);
  NeighborTable table(single, 1);
  std::vector<double> e0{2.0}, e{0.0};
  ppr_async_step(0, table, A1, e0, 0.3, e);
  CHECK(e[0] == doctest::Approx(0.6));
  CHECK(ppr_async_step(0, table, A1, e0, 0.3, e) == 0.0);
}

TEST_CASE("synchronous iteration") {
  std::mt19937_64 rng(4);
  auto g = generators::random_connected(50, 0.06, 4);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  auto E0 = testsupport::random_matrix(50, 3, rng);

  auto trivial = ppr_synchronous(A, E0, 1.0, 1e-12, 10);
  CHECK(trivial.iterations == 1);
  CHECK(trivial.rows == E0);

  std::vector<double> trace;
  auto sync = ppr_synchronous(A, E0, 0.5, 1e-10, 10000, Execution::Parallel, &trace);
  CHECK(max_abs_diff(sync.rows, ppr_closed_form(A, E0, 0.5).rows) < 1e-8);
  CHECK(sync.iterations == trace.size());

  // Update norms shrink geometrically at rate (1-a): the scaled sequence stays bounded.
  const double c0 = trace.front() / 0.5;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    CHECK(trace[t] <= 50.0 * c0 * std::pow(0.5, static_cast<double>(t + 1)) + 1e-15);
  }

  auto serial = ppr_synchronous(A, E0, 0.5, 1e-10, 10000, Execution::Serial);
  CHECK(serial.rows == sync.rows);
}

TEST_CASE("synchronous non-convergence carries the residual") {
  auto g = generators::ring(20);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  RowMatrix E0(20, 1);
  E0(0, 0) = 1.0;
  try {
    ppr_synchronous(A, E0, 0.01, 1e-14, 5);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 0.0);
    CHECK(e.trace().size() == 5);
  }
}

TEST_CASE("async step matches its formula") {
  std::mt19937_64 rng(5);
  auto g = generators::random_connected(12, 0.3, 5);
  TransitionMatrix A(g, Normalization::Symmetric);
  auto E = testsupport::random_matrix(12, 3, rng);
  NeighborTable table(g, 3);
  table.fill_from(g, E);
  auto dense = testsupport::dense_transition(g, Normalization::Symmetric);
  std::vector<double> e0{0.5, -1.0, 2.0};
  for (NodeId u = 0; u < 12; ++u) {
    std::vector<double> e(3, 0.0);
    ppr_async_step(u, table, A, e0, 0.25, e);
    for (std::size_t c = 0; c < 3; ++c) {
      double want = 0.25 * e0[c];
      for (NodeId v = 0; v < 12; ++v) want += 0.75 * dense[u * 12 + v] * E(v, c);
      CHECK(e[c] == doctest::Approx(want).epsilon(1e-13));
    }
  }
}

TEST_CASE("unknown neighbors read as zero") {
  auto g = generators::path(3);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  NeighborTable table(g, 1);
  CHECK_FALSE(table.known(1, 0));
  std::vector<double> e0{1.0}, e{0.0};
  ppr_async_step(1, table, A, e0, 0.5, e);
  CHECK(e[0] == 0.5);
  std::vector<double> v{3.0};
  table.record(1, 0, v);
  CHECK(table.known(1, 0));
  ppr_async_step(1, table, A, e0, 0.5, e);
  CHECK(e[0] == doctest::Approx(0.5 + 0.5 * 3.0));
}

TEST_CASE("round-robin async steps on a ring reach the closed form") {
  auto g = generators::ring(10);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  std::mt19937_64 rng(6);
  auto E0 = testsupport::random_matrix(10, 2, rng);
  RowMatrix E = E0;
  NeighborTable table(g, 2);
  double change = 1.0;
  int sweeps = 0;
  while (change >= 1e-8 && sweeps < 10000) {
    change = 0;
    for (NodeId u = 0; u < 10; ++u) {
      auto nb = g.neighbors(u);
      for (std::size_t s = 0; s < nb.size(); ++s) table.record(u, s, E.row(nb[s]));
      change = std::max(change, ppr_async_step(u, table, A, E0.row(u), 0.5, E.row(u)));
    }
    ++sweeps;
  }
  CHECK(max_abs_diff(E, ppr_closed_form(A, E0, 0.5).rows) < 1e-6);
}

TEST_CASE("gossip diffusion") {
  std::mt19937_64 rng(7);
  auto g = generators::random_connected(20, 0.15, 7);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  auto E0 = testsupport::random_matrix(20, 3, rng);
  ScheduleConfig sched{1.0, 3, 100000};
  auto run = run_async_diffusion(g, A, E0, 0.5, sched, 1e-6, 42);
  CHECK(max_abs_diff(run.embeddings.rows, ppr_closed_form(A, E0, 0.5).rows) < 1e-5);
  CHECK(run.embeddings.method == DiffusionMethod::Asynchronous);

  auto again = run_async_diffusion(g, A, E0, 0.5, sched, 1e-6, 42);
  CHECK(again.embeddings.iterations == run.embeddings.iterations);
  CHECK(again.embeddings.rows == run.embeddings.rows);

  auto instant = run_async_diffusion(g, A, E0, 1.0, sched, 1e-6, 1);
  CHECK(instant.embeddings.rows == E0);

  ScheduleConfig sparse{0.3, 10, 100000};
  auto lazy = run_async_diffusion(g, A, E0, 0.5, sparse, 1e-9, 3);
  CHECK(max_abs_diff(lazy.embeddings.rows, ppr_closed_form(A, E0, 0.5).rows) < 1e-6);

  ScheduleConfig tiny{1.0, 5, 3};
  CHECK_THROWS_AS(run_async_diffusion(g, A, E0, 0.1, tiny, 1e-12, 1), ConvergenceError);
}

TEST_CASE("gossip tables only hold neighbors' values") {
  std::mt19937_64 rng(8);
  auto g = generators::watts_strogatz(30, 4, 0.3, 8);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  auto E0 = testsupport::random_matrix(30, 2, rng);
  auto run = run_async_diffusion(g, A, E0, 0.5, {}, 1e-10, 9);
  for (NodeId u = 0; u < 30; ++u) {
    auto nb = g.neighbors(u);
    CHECK(run.tables.degree(u) == nb.size());
    for (std::size_t s = 0; s < nb.size(); ++s) {
      REQUIRE(run.tables.known(u, s));
      for (std::size_t c = 0; c < 2; ++c) {
        CHECK(std::abs(run.tables.latest(u, s)[c] - run.embeddings.rows(nb[s], c)) < 1e-8);
      }
    }
  }
}

TEST_CASE("diffusion is linear in the personalization") {
  std::mt19937_64 rng(9);
  auto g = generators::random_connected(60, 0.05, 9);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  auto E1 = testsupport::random_matrix(60, 3, rng);
  auto E2 = testsupport::random_matrix(60, 3, rng);
  for (double a : {0.1, 0.5, 0.9}) {
    auto joint = ppr_closed_form(A, sum(E1, E2), a).rows;
    auto split = sum(ppr_closed_form(A, E1, a).rows, ppr_closed_form(A, E2, a).rows);
    CHECK(max_abs_diff(joint, split) < 1e-9);
  }
}

TEST_CASE("signal decays along a path away from its source") {
  auto g = generators::path(12);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  RowMatrix end(12, 2), mid(12, 2);
  end(0, 0) = mid(5, 0) = 0.6;
  end(0, 1) = mid(5, 1) = 0.8;
  for (double a : {0.1, 0.5, 0.9}) {
    // Degree-normalized signal decays from an end-node source.
    auto E = ppr_closed_form(A, end, a).rows;
    for (NodeId u = 1; u < 12; ++u) {
      CHECK(row_norm(E, u) / g.degree(u) <= row_norm(E, u - 1) / g.degree(u - 1) + 1e-15);
    }
    // Raw norm decays in both directions from an interior source.
    auto M = ppr_closed_form(A, mid, a).rows;
    for (NodeId u = 6; u < 12; ++u) CHECK(row_norm(M, u) <= row_norm(M, u - 1) + 1e-15);
    for (NodeId u = 5; u > 0; --u) CHECK(row_norm(M, u - 1) <= row_norm(M, u) + 1e-15);
  }
  // Column-stochastic mass follows degree: under heavy diffusion the degree-2
  // neighbor of a degree-1 source ends up with more signal than the source.
  auto heavy = ppr_closed_form(A, end, 0.1).rows;
  auto oracle = testsupport::dense_ppr(testsupport::dense_transition(g, Normalization::ColumnStochastic), end, 0.1);
  CHECK(max_abs_diff(heavy, oracle) < 1e-12);
  CHECK(row_norm(heavy, 1) > row_norm(heavy, 0));
}

TEST_CASE("larger teleport keeps the source closer to its personalization") {
  auto g = generators::watts_strogatz(40, 4, 0.1, 10);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  RowMatrix E0(40, 2);
  E0(5, 0) = 1.0;
  double prev = 1e300;
  for (double a : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    auto E = ppr_closed_form(A, E0, a).rows;
    RowMatrix diff(1, 2);
    diff(0, 0) = E(5, 0) - a * E0(5, 0);
    diff(0, 1) = E(5, 1) - a * E0(5, 1);
    const double ratio = row_norm(diff, 0) / row_norm(E, 5);
    CHECK(ratio < prev);
    prev = ratio;
  }
}

TEST_CASE("diffuse fills tables exactly for closed and sync") {
  std::mt19937_64 rng(11);
  auto g = generators::random_connected(15, 0.2, 11);
  TransitionMatrix A(g, Normalization::ColumnStochastic);
  auto E0 = testsupport::random_matrix(15, 2, rng);
  for (auto method : {DiffusionMethod::Closed, DiffusionMethod::Synchronous}) {
    DiffusionConfig cfg;
    cfg.method = method;
    auto d = diffuse(g, A, E0, 0.5, cfg, 0);
    for (NodeId u = 0; u < 15; ++u) {
      auto nb = g.neighbors(u);
      for (std::size_t s = 0; s < nb.size(); ++s) {
        CHECK(std::equal(d.tables.latest(u, s).begin(), d.tables.latest(u, s).end(),
                         d.embeddings.rows.row(nb[s]).begin()));
      }
    }
  }
}

TEST_CASE("embedding dumps round-trip exactly") {
  std::mt19937_64 rng(12);
  DiffusedEmbeddings e{testsupport::random_matrix(7, 3, rng), 0.25, DiffusionMethod::Asynchronous, 321};
  const auto dir = std::filesystem::temp_directory_path();
  for (const char* name : {"pprsim_emb.bin", "pprsim_emb.csv"}) {
    auto path = dir / name;
    save_embeddings(path, e);
    auto back = load_embeddings(path);
    CHECK(back.rows == e.rows);
    CHECK(back.alpha == e.alpha);
    CHECK(back.method == e.method);
    CHECK(back.iterations == e.iterations);
    std::filesystem::remove(path);
  }
  CHECK_THROWS(load_embeddings(dir / "pprsim_missing.bin"));
}

TEST_CASE("method names") {
  for (auto m : {DiffusionMethod::Closed, DiffusionMethod::Synchronous, DiffusionMethod::Asynchronous}) {
    CHECK(parse_diffusion_method(to_string(m)) == m);
  }
  CHECK_THROWS(parse_diffusion_method("heat"));
}

}  // TEST_SUITE
