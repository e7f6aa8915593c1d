#include <algorithm>
#include <cstdint>
#include <vector>

#include "pgdcrnn/kernels.hpp"

namespace pgdcrnn::kernels::omp {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kMinParallelWork = 1 << 15;
}  // namespace

void spmm(const SparseMatrix &s, const double *x, std::size_t c, double *out,
          bool accumulate) {
  const auto &ptr = s.row_ptr();
  const auto &idx = s.col_idx();
  const auto &val = s.values();
  const auto rows = static_cast<std::int64_t>(s.rows());
  const bool go_parallel = s.nnz() * c >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double *row = out + i * c;
    if (!accumulate) std::fill(row, row + c, 0.0);
    for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) {
      const double w = val[p];
      const double *src = x + static_cast<std::size_t>(idx[p]) * c;
      for (std::size_t j = 0; j < c; ++j) row[j] += w * src[j];
    }
  }
}

void gemm(const double *a, const double *b, double *out, std::size_t n,
          std::size_t k, std::size_t m, bool accumulate) {
  const bool go_parallel = n * k * m >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double *row = out + i * m;
    if (!accumulate) std::fill(row, row + m, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double *brow = b + p * m;
#pragma omp simd
      for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
    }
  }
}

void gemm_tn_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t k, std::size_t m) {
  // Parallel over output rows; each output element still sums over the
  // shared dimension in ascending order, like the serial kernel.
  const bool go_parallel = n * k * m >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(k); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double *orow = out + i * m;
    for (std::size_t r = 0; r < n; ++r) {
      const double ai = a[r * k + i];
      const double *brow = b + r * m;
#pragma omp simd
      for (std::size_t j = 0; j < m; ++j) orow[j] += ai * brow[j];
    }
  }
}

void gemm_nt_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t m, std::size_t k) {
  std::vector<double> bt(m * k);
  for (std::size_t q = 0; q < k; ++q) {
    for (std::size_t j = 0; j < m; ++j) bt[j * k + q] = b[q * m + j];
  }
  const double *btp = bt.data();
  const bool go_parallel = n * k * m >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double *arow = a + i * m;
    double *orow = out + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double aij = arow[j];
      const double *btrow = btp + j * k;
#pragma omp simd
      for (std::size_t q = 0; q < k; ++q) orow[q] += aij * btrow[q];
    }
  }
}

}  // namespace pgdcrnn::kernels::omp
