// Parallel kernels against the serial reference loops.

#include <benchmark/benchmark.h>

#include <vector>

#include "ispasp/kernels.hpp"
#include "ispasp/prng.hpp"

namespace {

using namespace ispasp;

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Prng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

template <auto Gemm>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Gemm(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * static_cast<double>(n * n * n), benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

template <auto Transpose>
void BM_Transpose(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto in = filled(n * n, 3);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    Transpose(n, n, in.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * sizeof(double)));
}

template <auto ColumnSums>
void BM_ColumnSums(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto in = filled(n * 256, 4);
  std::vector<double> out(n);
  for (auto _ : state) {
    ColumnSums(n, 256, in.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * 256 * sizeof(double)));
}

}  // namespace

BENCHMARK(BM_Gemm<kernels::parallel::gemm>)->Name("gemm/parallel")->Arg(128)->Arg(512)->Arg(1024)->UseRealTime();
BENCHMARK(BM_Gemm<kernels::serial::gemm>)->Name("gemm/serial")->Arg(128)->Arg(512)->Arg(1024)->UseRealTime();
BENCHMARK(BM_Transpose<kernels::parallel::transpose>)->Name("transpose/parallel")->Arg(1024)->Arg(4096)->UseRealTime();
BENCHMARK(BM_Transpose<kernels::serial::transpose>)->Name("transpose/serial")->Arg(1024)->Arg(4096)->UseRealTime();
BENCHMARK(BM_ColumnSums<kernels::parallel::column_sums>)->Name("column_sums/parallel")->Arg(1000)->Arg(10000)->UseRealTime();
BENCHMARK(BM_ColumnSums<kernels::serial::column_sums>)->Name("column_sums/serial")->Arg(1000)->Arg(10000)->UseRealTime();

BENCHMARK_MAIN();
