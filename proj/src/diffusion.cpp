#include "pprsim/diffusion.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace pprsim {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("teleport probability must be in (0, 1], got " +
                                std::to_string(alpha));
  }
}

void check_shape(const TransitionMatrix& A, const RowMatrix& E0) {
  if (E0.rows() != A.size()) {
    throw std::invalid_argument("personalization has " + std::to_string(E0.rows()) +
                                " rows for a graph of " + std::to_string(A.size()) + " nodes");
  }
}

constexpr std::size_t kClosedFormLimit = 20000;
constexpr char kMagic[8] = {'P', 'P', 'R', 'S', 'E', 'M', 'B', '1'};

}  // namespace

std::vector<double> personalization_vector(std::span<const std::span<const double>> docs,
                                           std::size_t dim) {
  std::vector<double> sum(dim, 0.0);
  for (auto d : docs) {
    if (d.size() != dim) {
      throw std::invalid_argument("personalization_vector: document of dimension " +
                                  std::to_string(d.size()) + ", expected " + std::to_string(dim));
    }
    for (std::size_t c = 0; c < dim; ++c) sum[c] += d[c];
  }
  return sum;
}

RowMatrix personalization_matrix(std::size_t node_count, std::size_t dim,
                                 std::span<const std::span<const double>> docs,
                                 std::span<const NodeId> holder) {
  if (docs.size() != holder.size()) {
    throw std::invalid_argument("personalization_matrix: docs and holders differ in length");
  }
  RowMatrix E0(node_count, dim);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (holder[i] >= node_count) throw std::out_of_range("personalization_matrix: bad holder");
    if (docs[i].size() != dim) {
      throw std::invalid_argument("personalization_matrix: document dimension mismatch");
    }
    auto row = E0.row(holder[i]);
    for (std::size_t c = 0; c < dim; ++c) row[c] += docs[i][c];
  }
  return E0;
}

std::string to_string(DiffusionMethod m) {
  switch (m) {
    case DiffusionMethod::Closed: return "closed";
    case DiffusionMethod::Synchronous: return "sync";
    case DiffusionMethod::Asynchronous: return "async";
  }
  return "?";
}

DiffusionMethod parse_diffusion_method(const std::string& s) {
  if (s == "closed") return DiffusionMethod::Closed;
  if (s == "sync" || s == "synchronous") return DiffusionMethod::Synchronous;
  if (s == "async" || s == "asynchronous") return DiffusionMethod::Asynchronous;
  throw std::invalid_argument("unknown diffusion method '" + s + "' (expected closed|sync|async)");
}

double fixed_point_residual(const TransitionMatrix& A, const RowMatrix& E0, const RowMatrix& E,
                            double alpha) {
  RowMatrix image(E.rows(), E.cols());
  kernels::serial::propagate(A, E, E0, alpha, image);
  return max_abs_diff(image, E);
}

DiffusedEmbeddings ppr_closed_form(const TransitionMatrix& A, const RowMatrix& E0, double alpha) {
  check_alpha(alpha);
  check_shape(A, E0);
  const std::size_t n = A.size();
  if (n > kClosedFormLimit) {
    throw std::invalid_argument("closed form limited to " + std::to_string(kClosedFormLimit) +
                                " nodes, graph has " + std::to_string(n));
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n);
  for (NodeId u = 0; u < n; ++u) {
    triplets.emplace_back(u, u, 1.0);
    auto cols = A.row_columns(u);
    auto vals = A.row_values(u);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      triplets.emplace_back(u, cols[i], -(1.0 - alpha) * vals[i]);
    }
  }
  Eigen::SparseMatrix<double> system(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> solver;
  solver.compute(system);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("closed form: factorization failed");
  }

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> rhs_in(E0.data().data(), static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(E0.cols()));
  Eigen::MatrixXd rhs = alpha * rhs_in;
  Eigen::MatrixXd solution = solver.solve(rhs);
  if (solver.info() != Eigen::Success) throw std::runtime_error("closed form: solve failed");

  DiffusedEmbeddings out{RowMatrix(n, E0.cols()), alpha, DiffusionMethod::Closed, 0};
  Eigen::Map<RowMajor>(out.rows.data().data(), static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(E0.cols())) = solution;
  return out;
}

DiffusedEmbeddings ppr_synchronous(const TransitionMatrix& A, const RowMatrix& E0, double alpha,
                                   double tol, std::size_t max_iters, Execution exec,
                                   std::vector<double>* update_trace) {
  check_alpha(alpha);
  check_shape(A, E0);
  if (!(tol > 0.0)) throw std::invalid_argument("ppr_synchronous: tol must be positive");

  RowMatrix current = E0;
  RowMatrix next(E0.rows(), E0.cols());
  std::vector<double> trace;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    double delta = kernels::propagate(exec, A, current, E0, alpha, next);
    std::swap(current, next);
    trace.push_back(delta);
    if (delta < tol) {
      if (update_trace) *update_trace = std::move(trace);
      return {std::move(current), alpha, DiffusionMethod::Synchronous, it};
    }
  }
  double residual = trace.empty() ? 0.0 : trace.back();
  throw ConvergenceError("ppr_synchronous: no convergence in " + std::to_string(max_iters) +
                             " iterations (last update " + std::to_string(residual) + ")",
                         residual, std::move(trace));
}

NeighborTable::NeighborTable(const OverlayGraph& g, std::size_t dim)
    : dim_(dim), offsets_(g.offsets().begin(), g.offsets().end()) {
  values_.assign(offsets_.back() * dim_, 0.0);
  known_.assign(offsets_.back(), 0);
}

void NeighborTable::record(NodeId u, std::size_t slot, std::span<const double> embedding) {
  const std::size_t at = offsets_[u] + slot;
  std::copy(embedding.begin(), embedding.end(), values_.begin() + static_cast<std::ptrdiff_t>(at * dim_));
  known_[at] = 1;
}

void NeighborTable::fill_from(const OverlayGraph& g, const RowMatrix& E) {
  for (NodeId u = 0; u < g.node_count(); ++u) {
    auto nb = g.neighbors(u);
    for (std::size_t s = 0; s < nb.size(); ++s) record(u, s, E.row(nb[s]));
  }
}

double ppr_async_step(NodeId u, const NeighborTable& table, const TransitionMatrix& A,
                      std::span<const double> e0_row, double alpha, std::span<double> e_u) {
  const std::size_t dim = e_u.size();
  auto weights = A.row_values(u);
  std::vector<double> acc(dim, 0.0);
  for (std::size_t s = 0; s < weights.size(); ++s) {
    auto latest = table.latest(u, s);
    for (std::size_t c = 0; c < dim; ++c) acc[c] += weights[s] * latest[c];
  }
  double change = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    double value = (1.0 - alpha) * acc[c] + alpha * e0_row[c];
    change = std::max(change, std::abs(value - e_u[c]));
    e_u[c] = value;
  }
  return change;
}

AsyncDiffusion run_async_diffusion(const OverlayGraph& g, const TransitionMatrix& A,
                                   const RowMatrix& E0, double alpha,
                                   const ScheduleConfig& schedule, double tol,
                                   std::uint64_t seed) {
  check_alpha(alpha);
  check_shape(A, E0);
  if (!(schedule.contact_probability > 0.0 && schedule.contact_probability <= 1.0)) {
    throw std::invalid_argument("contact probability must be in (0, 1]");
  }
  if (schedule.window == 0) throw std::invalid_argument("convergence window must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("run_async_diffusion: tol must be positive");

  const std::size_t n = g.node_count();
  const std::size_t dim = E0.cols();
  AsyncDiffusion out{{E0, alpha, DiffusionMethod::Asynchronous, 0}, NeighborTable(g, dim), {}};
  RowMatrix& E = out.embeddings.rows;
  NeighborTable& table = out.tables;

  // mirror[offsets[u] + s] = slot of u inside neighbors(neighbors(u)[s]).
  auto offsets = g.offsets();
  std::vector<std::size_t> mirror(offsets.back());
  for (NodeId u = 0; u < n; ++u) {
    auto nb = g.neighbors(u);
    for (std::size_t s = 0; s < nb.size(); ++s) mirror[offsets[u] + s] = *g.neighbor_slot(nb[s], u);
  }

  // Running Σ_v A[u][v]·latest(u, v), updated as table entries change. Gives
  // the same value as ppr_async_step without rescanning the table.
  RowMatrix aggregate(n, dim);
  auto learn = [&](NodeId u, std::size_t slot, std::span<const double> fresh) {
    const double w = A.row_values(u)[slot];
    auto old = table.latest(u, slot);
    auto agg = aggregate.row(u);
    for (std::size_t c = 0; c < dim; ++c) agg[c] += w * (fresh[c] - old[c]);
    table.record(u, slot, fresh);
  };
  auto step = [&](NodeId u) {
    auto agg = aggregate.row(u);
    auto base = E0.row(u);
    auto e = E.row(u);
    double change = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      double value = (1.0 - alpha) * agg[c] + alpha * base[c];
      change = std::max(change, std::abs(value - e[c]));
      e[c] = value;
    }
    return change;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<double> snapshot(dim);
  std::size_t quiet = 0;
  for (std::size_t tick = 1; tick <= schedule.max_ticks; ++tick) {
    double tick_max = 0.0;
    for (NodeId u = 0; u < n; ++u) {
      if (schedule.contact_probability < 1.0 && coin(rng) >= schedule.contact_probability) continue;
      const std::size_t deg = g.degree(u);
      if (deg == 0) {
        tick_max = std::max(tick_max, step(u));
        continue;
      }
      std::uniform_int_distribution<std::size_t> pick(0, deg - 1);
      const std::size_t slot = pick(rng);
      const NodeId v = g.neighbors(u)[slot];
      auto eu = E.row(u);
      std::copy(eu.begin(), eu.end(), snapshot.begin());
      learn(u, slot, E.row(v));
      learn(v, mirror[offsets[u] + slot], snapshot);
      tick_max = std::max(tick_max, step(u));
      tick_max = std::max(tick_max, step(v));
    }
    out.update_trace.push_back(tick_max);
    quiet = tick_max < tol ? quiet + 1 : 0;
    if (quiet >= schedule.window) {
      out.embeddings.iterations = tick;
      return out;
    }
  }
  double residual = out.update_trace.empty() ? 0.0 : out.update_trace.back();
  throw ConvergenceError("run_async_diffusion: no convergence in " +
                             std::to_string(schedule.max_ticks) + " ticks (last update " +
                             std::to_string(residual) + ")",
                         residual, std::move(out.update_trace));
}

Diffusion diffuse(const OverlayGraph& g, const TransitionMatrix& A, const RowMatrix& E0,
                  double alpha, const DiffusionConfig& cfg, std::uint64_t seed) {
  if (cfg.method == DiffusionMethod::Asynchronous) {
    auto run = run_async_diffusion(g, A, E0, alpha, cfg.schedule, cfg.tol, seed);
    return {std::move(run.embeddings), std::move(run.tables)};
  }
  Diffusion out;
  out.embeddings = cfg.method == DiffusionMethod::Closed
                       ? ppr_closed_form(A, E0, alpha)
                       : ppr_synchronous(A, E0, alpha, cfg.tol, cfg.max_iters, cfg.exec);
  out.tables = NeighborTable(g, E0.cols());
  out.tables.fill_from(g, out.embeddings.rows);
  return out;
}

void save_embeddings(const std::filesystem::path& path, const DiffusedEmbeddings& e) {
  if (path.extension() == ".csv") {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# alpha=" << e.alpha << " method=" << to_string(e.method)
        << " iterations=" << e.iterations << "\n";
    char buf[32];
    for (std::size_t r = 0; r < e.rows.rows(); ++r) {
      auto row = e.rows.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", row[c]);
        out << (c ? "," : "") << buf;
      }
      out << "\n";
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::uint64_t rows = e.rows.rows(), cols = e.rows.cols(), iters = e.iterations;
  const std::uint32_t method = static_cast<std::uint32_t>(e.method);
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(&e.alpha), sizeof e.alpha);
  out.write(reinterpret_cast<const char*>(&method), sizeof method);
  out.write(reinterpret_cast<const char*>(&iters), sizeof iters);
  out.write(reinterpret_cast<const char*>(e.rows.data().data()),
            static_cast<std::streamsize>(e.rows.data().size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

DiffusedEmbeddings load_embeddings(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    DiffusedEmbeddings e;
    std::vector<double> values;
    std::size_t cols = 0, rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        char method[32] = {0};
        std::size_t iters = 0;
        if (std::sscanf(line.c_str(), "# alpha=%lf method=%31s iterations=%zu", &e.alpha, method,
                        &iters) == 3) {
          e.method = parse_diffusion_method(method);
          e.iterations = iters;
        }
        continue;
      }
      std::stringstream ss(line);
      std::string field;
      std::size_t count = 0;
      while (std::getline(ss, field, ',')) {
        values.push_back(std::stod(field));
        ++count;
      }
      if (rows == 0) cols = count;
      if (count != cols) throw std::runtime_error(path.string() + ": ragged embedding rows");
      ++rows;
    }
    e.rows = RowMatrix(rows, cols);
    e.rows.data() = std::move(values);
    return e;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error(path.string() + ": not an embedding dump");
  }
  std::uint64_t rows = 0, cols = 0, iters = 0;
  std::uint32_t method = 0;
  DiffusedEmbeddings e;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  in.read(reinterpret_cast<char*>(&e.alpha), sizeof e.alpha);
  in.read(reinterpret_cast<char*>(&method), sizeof method);
  in.read(reinterpret_cast<char*>(&iters), sizeof iters);
  if (!in || method > 2) throw std::runtime_error(path.string() + ": truncated header");
  e.method = static_cast<DiffusionMethod>(method);
  e.iterations = iters;
  e.rows = RowMatrix(rows, cols);
  in.read(reinterpret_cast<char*>(e.rows.data().data()),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in) throw std::runtime_error(path.string() + ": truncated data");
  return e;
}

}  // namespace pprsim
