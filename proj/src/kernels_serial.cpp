#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pprsim/kernels.hpp"

namespace pprsim {

std::string to_string(Execution e) { return e == Execution::Serial ? "serial" : "parallel"; }

namespace kernels::serial {

double propagate(const TransitionMatrix& A, const RowMatrix& in, const RowMatrix& seed,
                 double alpha, RowMatrix& out) {
  const std::size_t n = A.size();
  const std::size_t dim = in.cols();
  const double keep = 1.0 - alpha;
  double delta = 0.0;
  std::vector<double> acc(dim);
  for (NodeId u = 0; u < n; ++u) {
    std::fill(acc.begin(), acc.end(), 0.0);
    auto cols = A.row_columns(u);
    auto vals = A.row_values(u);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      auto src = in.row(cols[i]);
      for (std::size_t c = 0; c < dim; ++c) acc[c] += vals[i] * src[c];
    }
    auto dst = out.row(u);
    auto prev = in.row(u);
    auto base = seed.row(u);
    for (std::size_t c = 0; c < dim; ++c) {
      dst[c] = keep * acc[c] + alpha * base[c];
      delta = std::max(delta, std::abs(dst[c] - prev[c]));
    }
  }
  return delta;
}

NearestHit nearest(const RowMatrix& vecs, std::span<const double> query,
                   std::span<const std::uint8_t> excluded) {
  NearestHit best{NearestHit::npos, 0.0};
  const std::size_t dim = vecs.cols();
  for (std::size_t r = 0; r < vecs.rows(); ++r) {
    if (excluded[r]) continue;
    auto row = vecs.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) s += query[c] * row[c];
    if (best.index == NearestHit::npos || s > best.score) best = {r, s};
  }
  return best;
}

}  // namespace kernels::serial
}  // namespace pprsim
