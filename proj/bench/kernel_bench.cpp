#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hindsight/kernels.hpp"

namespace kernels = hindsight::kernels;

namespace {

using Gemm = void (*)(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);

std::vector<double> random_matrix(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Square-ish shapes typical of the agent: batch x hidden x hidden.
void run_gemm(benchmark::State& state, Gemm gemm) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto k = static_cast<std::size_t>(state.range(2));
  const auto a = random_matrix(m * k, 1), b = random_matrix(k * n, 2);
  std::vector<double> c(m * n, 0.0);
  for (auto _ : state) {
    gemm(m, n, k, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * static_cast<double>(m * n * k),
                                                 benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 128, 128})->Args({256, 256, 256})->Args({128, 256, 47})->Args({256, 8, 256})->Args({512, 512, 512});
}

void BM_gemm_nn_reference(benchmark::State& s) { run_gemm(s, kernels::reference::gemm_nn); }
void BM_gemm_nn(benchmark::State& s) { run_gemm(s, kernels::gemm_nn); }
void BM_gemm_nt_reference(benchmark::State& s) { run_gemm(s, kernels::reference::gemm_nt); }
void BM_gemm_nt(benchmark::State& s) { run_gemm(s, kernels::gemm_nt); }
void BM_gemm_tn_reference(benchmark::State& s) { run_gemm(s, kernels::reference::gemm_tn); }
void BM_gemm_tn(benchmark::State& s) { run_gemm(s, kernels::gemm_tn); }

}  // namespace

BENCHMARK(BM_gemm_nn_reference)->Apply(shapes);
BENCHMARK(BM_gemm_nn)->Apply(shapes);
BENCHMARK(BM_gemm_nt_reference)->Apply(shapes);
BENCHMARK(BM_gemm_nt)->Apply(shapes);
BENCHMARK(BM_gemm_tn_reference)->Apply(shapes);
BENCHMARK(BM_gemm_tn)->Apply(shapes);

BENCHMARK_MAIN();
