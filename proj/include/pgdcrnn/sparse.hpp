#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pgdcrnn/tensor.hpp"

namespace pgdcrnn {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse rows. Column indices are sorted within each row and no
/// explicit zeros are stored.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Duplicate coordinates are summed; entries that end up zero are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix from_dense(const Tensor &dense);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  const std::vector<std::size_t> &row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::uint32_t> &col_idx() const noexcept { return col_idx_; }
  const std::vector<double> &values() const noexcept { return values_; }

  /// Stored value at (r, c), or 0.
  double at(std::size_t r, std::size_t c) const;
  bool contains(std::size_t r, std::size_t c) const;

  SparseMatrix transpose() const;
  Tensor to_dense() const;
  std::vector<Triplet> triplets() const;

  /// Row i scaled by 1/sum(row i); rows summing to zero stay empty.
  SparseMatrix row_normalized() const;

  friend bool operator==(const SparseMatrix &, const SparseMatrix &) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace pgdcrnn
