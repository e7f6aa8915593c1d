#pragma once

// Dense and sparse kernels behind the tape. Every kernel has a serial
// reference version and an OpenMP version; the OpenMP versions split work by
// output rows only, so each output element is accumulated in the same order
// as the serial reference and the two agree bit for bit.

#include <cstddef>

#include "pgdcrnn/sparse.hpp"

namespace pgdcrnn::kernels {

enum class Backend { kSerial, kParallel };

/// Kernel backend for the calling thread (default kParallel).
Backend backend() noexcept;
void set_backend(Backend b) noexcept;

/// Restores the previous backend on destruction.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend &) = delete;
  ScopedBackend &operator=(const ScopedBackend &) = delete;

 private:
  Backend previous_;
};

// out[S.rows x c] (+)= S * x[S.cols x c]
void spmm(const SparseMatrix &s, const double *x, std::size_t c, double *out,
          bool accumulate);
// out[n x m] (+)= a[n x k] * b[k x m]
void gemm(const double *a, const double *b, double *out, std::size_t n,
          std::size_t k, std::size_t m, bool accumulate);
// out[k x m] += a[n x k]^T * b[n x m]
void gemm_tn_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t k, std::size_t m);
// out[n x k] += a[n x m] * b[k x m]^T
void gemm_nt_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t m, std::size_t k);

namespace serial {
void spmm(const SparseMatrix &s, const double *x, std::size_t c, double *out,
          bool accumulate);
void gemm(const double *a, const double *b, double *out, std::size_t n,
          std::size_t k, std::size_t m, bool accumulate);
void gemm_tn_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t k, std::size_t m);
void gemm_nt_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t m, std::size_t k);
}  // namespace serial

namespace omp {
void spmm(const SparseMatrix &s, const double *x, std::size_t c, double *out,
          bool accumulate);
void gemm(const double *a, const double *b, double *out, std::size_t n,
          std::size_t k, std::size_t m, bool accumulate);
void gemm_tn_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t k, std::size_t m);
void gemm_nt_acc(const double *a, const double *b, double *out, std::size_t n,
                 std::size_t m, std::size_t k);
}  // namespace omp

}  // namespace pgdcrnn::kernels
