// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "nscomp/kernels/kernels.hpp"
#include "nscomp/numkit/linalg.hpp"

using namespace nscomp;
namespace k = nscomp::kernels;

namespace {

DenseMatrix matrix(std::size_t n, std::uint64_t seed = 1) {
  RngStream s(seed, n);
  return sample_gaussian(s, n, n);
}

template <bool Parallel>
void BM_gemv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = matrix(n);
  std::vector<double> x(n, 1.0), y(n);
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::gemv(a, x, y);
    else k::serial::gemv(a, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = matrix(n), b = matrix(n, 2);
  DenseMatrix c(n, n);
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::gemm(a, b, c);
    else k::serial::gemm(a, b, c);
    benchmark::DoNotOptimize(c.data().data());
  }
}

template <bool Parallel>
void BM_conv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RngStream s(2, n);
  const ConvFilter f = sample_gaussian(s, 16, 16, 3);
  const Shape in{16, n, n};
  const std::vector<double> x = sample_gaussian_vector(s, in.size());
  const std::size_t o = k::conv_out_size(n, 3, 1);
  std::vector<double> y(16 * o * o);
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::conv_forward(f, 1, in, x, y);
    else k::serial::conv_forward(f, 1, in, x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_project(benchmark::State& state) {
  const auto kk = static_cast<std::size_t>(state.range(0));
  RngStream s(3, kk);
  const std::vector<double> a = sample_gaussian_vector(s, 4096);
  const RngStream helper(4, 0);
  std::vector<double> z(kk), out(a.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::omp::project_coefficients(a, helper, z);
      k::omp::project_reconstruct(z, helper, out);
    } else {
      k::serial::project_coefficients(a, helper, z);
      k::serial::project_reconstruct(z, helper, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_gemv<false>)->Name("gemv/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_gemv<true>)->Name("gemv/omp")->Arg(256)->Arg(1024);
BENCHMARK(BM_gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(192);
BENCHMARK(BM_gemm<true>)->Name("gemm/omp")->Arg(64)->Arg(192);
BENCHMARK(BM_conv<false>)->Name("conv/serial")->Arg(16)->Arg(32);
BENCHMARK(BM_conv<true>)->Name("conv/omp")->Arg(16)->Arg(32);
BENCHMARK(BM_project<false>)->Name("project/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_project<true>)->Name("project/omp")->Arg(64)->Arg(512);

BENCHMARK_MAIN();
