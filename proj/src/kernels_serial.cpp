#include "pgdcrnn/kernels.hpp"

#include <algorithm>
#include <vector>

namespace pgdcrnn::kernels {

namespace {
thread_local Backend t_backend = Backend::kParallel;
}  // namespace

Backend backend() noexcept { return t_backend; }
void set_backend(Backend b) noexcept { t_backend = b; }

void spmm(const SparseMatrix &s, const double *x, std::size_t c, double *out,
          bool accumulate) {
  if (t_backend == Backend::kParallel) return omp::spmm(s, x, c, out, accumulate);
  serial::spmm(s, x, c, out, accumulate);
}

void gemm(const double *a, const double *b, double *out, std::size_t n,
          std::size_t k, std::size_t m, bool accumulate) {
  if (t_backend == Backend::kParallel) return omp::gemm(a, b, out, n, k, m, accumulate);
  serial::gemm(a, b, out, n, k, m, accumulate);
}

void gemm_tn_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t k, std::size_t m) {
  if (t_backend == Backend::kParallel) return omp::gemm_tn_acc(a, b, out, n, k, m);
  serial::gemm_tn_acc(a, b, out, n, k, m);
}

void gemm_nt_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t m, std::size_t k) {
  if (t_backend == Backend::kParallel) return omp::gemm_nt_acc(a, b, out, n, m, k);
  serial::gemm_nt_acc(a, b, out, n, m, k);
}

namespace serial {

void spmm(const SparseMatrix &s, const double *x, std::size_t c, double *out,
          bool accumulate) {
  const auto &ptr = s.row_ptr();
  const auto &idx = s.col_idx();
  const auto &val = s.values();
  if (!accumulate) std::fill(out, out + s.rows() * c, 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double *row = out + i * c;
    for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) {
      const double w = val[p];
      const double *src = x + static_cast<std::size_t>(idx[p]) * c;
      for (std::size_t j = 0; j < c; ++j) row[j] += w * src[j];
    }
  }
}

void gemm(const double *a, const double *b, double *out, std::size_t n,
          std::size_t k, std::size_t m, bool accumulate) {
  if (!accumulate) std::fill(out, out + n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double *row = out + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double *brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
    }
  }
}

void gemm_tn_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t k, std::size_t m) {
  for (std::size_t r = 0; r < n; ++r) {
    const double *arow = a + r * k;
    const double *brow = b + r * m;
    for (std::size_t i = 0; i < k; ++i) {
      const double ai = arow[i];
      double *orow = out + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += ai * brow[j];
    }
  }
}

void gemm_nt_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t m, std::size_t k) {
  // Transposing b keeps the inner loop contiguous over out's columns.
  std::vector<double> bt(m * k);
  for (std::size_t q = 0; q < k; ++q) {
    for (std::size_t j = 0; j < m; ++j) bt[j * k + q] = b[q * m + j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double *arow = a + i * m;
    double *orow = out + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double aij = arow[j];
      const double *btrow = bt.data() + j * k;
      for (std::size_t q = 0; q < k; ++q) orow[q] += aij * btrow[q];
    }
  }
}

}  // namespace serial
}  // namespace pgdcrnn::kernels
