#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "pprsim/kernels.hpp"

namespace pprsim::kernels::omp {

double propagate(const TransitionMatrix& A, const RowMatrix& in, const RowMatrix& seed,
                 double alpha, RowMatrix& out) {
  const auto n = static_cast<std::ptrdiff_t>(A.size());
  const std::size_t dim = in.cols();
  const double keep = 1.0 - alpha;
  double delta = 0.0;

#pragma omp parallel reduction(max : delta)
  {
    std::vector<double> acc(dim);
#pragma omp for schedule(static)
    for (std::ptrdiff_t uu = 0; uu < n; ++uu) {
      const auto u = static_cast<NodeId>(uu);
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
  }
  return delta;
}

NearestHit nearest(const RowMatrix& vecs, std::span<const double> query,
                   std::span<const std::uint8_t> excluded) {
  const auto rows = static_cast<std::ptrdiff_t>(vecs.rows());
  const std::size_t dim = vecs.cols();
  NearestHit best{NearestHit::npos, 0.0};

#pragma omp parallel
  {
    NearestHit local{NearestHit::npos, 0.0};
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t rr = 0; rr < rows; ++rr) {
      const auto r = static_cast<std::size_t>(rr);
      if (excluded[r]) continue;
      auto row = vecs.row(r);
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) s += query[c] * row[c];
      if (local.index == NearestHit::npos || s > local.score) local = {r, s};
    }
#pragma omp critical(pprsim_nearest)
    {
      // (score desc, index asc) is a total order, so the merge order is irrelevant.
      if (local.index != NearestHit::npos &&
          (best.index == NearestHit::npos || local.score > best.score ||
           (local.score == best.score && local.index < best.index))) {
        best = local;
      }
    }
  }
  return best;
}

}  // namespace pprsim::kernels::omp
