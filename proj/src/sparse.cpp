#include "pgdcrnn/sparse.hpp"

#include <algorithm>

#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto &t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw_config("sparse entry (" + std::to_string(t.row) + "," +
                   std::to_string(t.col) + ") out of range");
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet &a, const Triplet &b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(rows, cols);
  std::size_t i = 0;
  while (i < triplets.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < triplets.size() && triplets[j].row == triplets[i].row &&
           triplets[j].col == triplets[i].col) {
      sum += triplets[j].value;
      ++j;
    }
    if (sum != 0.0) {
      m.col_idx_.push_back(static_cast<std::uint32_t>(triplets[i].col));
      m.values_.push_back(sum);
      ++m.row_ptr_[triplets[i].row + 1];
    }
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

SparseMatrix SparseMatrix::from_dense(const Tensor &dense) {
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      if (dense.at(r, c) != 0.0) t.push_back({r, c, dense.at(r, c)});
    }
  }
  return from_triplets(dense.rows(), dense.cols(), std::move(t));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  const auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(c));
  if (it == end || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

bool SparseMatrix::contains(std::size_t r, std::size_t c) const {
  const auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  return std::binary_search(begin, end, static_cast<std::uint32_t>(c));
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      out.push_back({r, col_idx_[p], values_[p]});
    }
  }
  return out;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t = triplets();
  for (auto &e : t) std::swap(e.row, e.col);
  return from_triplets(cols_, rows_, std::move(t));
}

Tensor SparseMatrix::to_dense() const {
  Tensor d({rows_, cols_});
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      d.at(r, col_idx_[p]) = values_[p];
    }
  }
  return d;
}

SparseMatrix SparseMatrix::row_normalized() const {
  SparseMatrix m = *this;
  for (std::size_t r = 0; r < rows_; ++r) {
    double sum = 0.0;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) sum += values_[p];
    if (sum == 0.0) continue;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) m.values_[p] = values_[p] / sum;
  }
  return m;
}

}  // namespace pgdcrnn
