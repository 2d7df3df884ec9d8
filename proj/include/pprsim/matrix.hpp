#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pprsim {

/// Dense row-major matrix of doubles. One row per node (or per token), one
/// column per embedding dimension.
class RowMatrix {
 public:
  RowMatrix() = default;
  RowMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const RowMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Largest absolute elementwise difference. Shapes must match.
double max_abs_diff(const RowMatrix& a, const RowMatrix& b);

/// Per-column sums (the 1ᵀX product).
std::vector<double> column_sums(const RowMatrix& m);

}  // namespace pprsim
