#include <benchmark/benchmark.h>

#include <random>

#include "ltood/mining/mining.hpp"
#include "ltood/ndcore/kernels.hpp"
#include "ltood/ndcore/tensor.hpp"

namespace {

using namespace ltood;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <auto Gemm>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const nd::kernels::GemmDims dims{n, n, n};
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Gemm(a, b, c, dims);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <auto LogSoftmax>
void bm_log_softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 11;
  const auto x = random_values(rows * cols, 3);
  std::vector<double> y(rows * cols);
  for (auto _ : state) {
    LogSoftmax(x, y, rows, cols);
    benchmark::DoNotOptimize(y.data());
  }
}

void bm_scores_serial(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto logits = nd::Tensor::matrix(rows, 11, random_values(rows * 11, 4));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mining::outlier_scores_serial(logits, 10, 4));
  }
}

void bm_scores_omp(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto logits = nd::Tensor::matrix(rows, 11, random_values(rows * 11, 4));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mining::outlier_scores(logits, 10, 4));
  }
}

}  // namespace

BENCHMARK(bm_gemm<nd::kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<nd::kernels::omp::gemm_nn>)->Name("gemm_nn/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_log_softmax<nd::kernels::serial::log_softmax_rows>)
    ->Name("log_softmax/serial")
    ->Arg(1 << 12)
    ->Arg(1 << 16);
BENCHMARK(bm_log_softmax<nd::kernels::omp::log_softmax_rows>)
    ->Name("log_softmax/omp")
    ->Arg(1 << 12)
    ->Arg(1 << 16);
BENCHMARK(bm_scores_serial)->Name("outlier_scores/serial")->Arg(1 << 14);
BENCHMARK(bm_scores_omp)->Name("outlier_scores/omp")->Arg(1 << 14);

BENCHMARK_MAIN();
