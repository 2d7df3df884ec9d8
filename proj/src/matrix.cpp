#include "pprsim/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pprsim {

double max_abs_diff(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  const auto& x = a.data();
  const auto& y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  return worst;
}

std::vector<double> column_sums(const RowMatrix& m) {
  std::vector<double> sums(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) sums[c] += row[c];
  }
  return sums;
}

}  // namespace pprsim
