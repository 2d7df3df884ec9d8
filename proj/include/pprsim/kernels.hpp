#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp; both produce
// bit-identical results because every output element is reduced in the same
// order regardless of thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "pprsim/graph.hpp"
#include "pprsim/matrix.hpp"

namespace pprsim {

enum class Execution { Serial, Parallel };

std::string to_string(Execution e);

struct NearestHit {
  std::size_t index;  // npos when nothing eligible
  double score;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

namespace kernels {

namespace serial {
/// out = (1-alpha)·A·in + alpha·seed. Returns max |out - in|.
double propagate(const TransitionMatrix& A, const RowMatrix& in, const RowMatrix& seed,
                 double alpha, RowMatrix& out);
/// Highest-dot-product row of vecs whose excluded[] flag is 0; ties go to the
/// lower index.
NearestHit nearest(const RowMatrix& vecs, std::span<const double> query,
                   std::span<const std::uint8_t> excluded);
}  // namespace serial

namespace omp {
double propagate(const TransitionMatrix& A, const RowMatrix& in, const RowMatrix& seed,
                 double alpha, RowMatrix& out);
NearestHit nearest(const RowMatrix& vecs, std::span<const double> query,
                   std::span<const std::uint8_t> excluded);
}  // namespace omp

inline double propagate(Execution e, const TransitionMatrix& A, const RowMatrix& in,
                        const RowMatrix& seed, double alpha, RowMatrix& out) {
  return e == Execution::Serial ? serial::propagate(A, in, seed, alpha, out)
                                : omp::propagate(A, in, seed, alpha, out);
}

inline NearestHit nearest(Execution e, const RowMatrix& vecs, std::span<const double> query,
                          std::span<const std::uint8_t> excluded) {
  return e == Execution::Serial ? serial::nearest(vecs, query, excluded)
                                : omp::nearest(vecs, query, excluded);
}

}  // namespace kernels
}  // namespace pprsim
