#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pgdcrnn/kernels.hpp"
#include "pgdcrnn/sparse.hpp"

namespace {

using namespace pgdcrnn;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double &x : v) x = u(rng);
  return v;
}

// Random row-normalized transition matrix with about `degree` entries per row.
SparseMatrix random_transition(std::size_t n, std::size_t degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> col(0, n - 1);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < degree; ++d) t.push_back({i, col(rng), w(rng)});
  }
  return SparseMatrix::from_triplets(n, n, std::move(t)).row_normalized();
}

template <bool Parallel>
void BM_Spmm(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t width = 64 * 17;  // batch x channels
  const SparseMatrix s = random_transition(n, 10, 1);
  const std::vector<double> x = random_values(n * width, 2);
  std::vector<double> out(n * width);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::omp::spmm(s, x.data(), width, out.data(), false);
    } else {
      kernels::serial::spmm(s, x.data(), width, out.data(), false);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.nnz() * width));
}

template <bool Parallel>
void BM_Gemm(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 34, m = 16;
  const std::vector<double> a = random_values(n * k, 3), b = random_values(k * m, 4);
  std::vector<double> out(n * m);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::omp::gemm(a.data(), b.data(), out.data(), n, k, m, false);
    } else {
      kernels::serial::gemm(a.data(), b.data(), out.data(), n, k, m, false);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * k * m));
}

template <bool Parallel>
void BM_GemmTn(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 34, m = 16;
  const std::vector<double> a = random_values(n * k, 5), b = random_values(n * m, 6);
  std::vector<double> out(k * m);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::omp::gemm_tn_acc(a.data(), b.data(), out.data(), n, k, m);
    } else {
      kernels::serial::gemm_tn_acc(a.data(), b.data(), out.data(), n, k, m);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * k * m));
}

}  // namespace

BENCHMARK(BM_Spmm<false>)->Arg(24)->Arg(256)->Arg(2048);
BENCHMARK(BM_Spmm<true>)->Arg(24)->Arg(256)->Arg(2048);
BENCHMARK(BM_Gemm<false>)->Arg(1536)->Arg(16384);
BENCHMARK(BM_Gemm<true>)->Arg(1536)->Arg(16384);
BENCHMARK(BM_GemmTn<false>)->Arg(1536)->Arg(16384);
BENCHMARK(BM_GemmTn<true>)->Arg(1536)->Arg(16384);

BENCHMARK_MAIN();
