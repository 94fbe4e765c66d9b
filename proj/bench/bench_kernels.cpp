// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "alforge/kernels.hpp"
#include "alforge/network.hpp"
#include "alforge/rng.hpp"
#include "alforge/uncertainty.hpp"

namespace {

using namespace alforge;

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  RngStream s(seed, 0);
  Tensor t(shape);
  for (double& v : t.data()) v = s.normal();
  return t;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? kernels::matmul(a, b) : kernels::serial::matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Name("matmul/parallel")->Arg(64)->Arg(256);

template <bool Parallel>
void BM_Conv(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const Tensor in = random_tensor({8, size, size}, 3), k = random_tensor({32, 8, 3, 3}, 4), bias = random_tensor({32}, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? kernels::conv2d_valid(in, k, bias) : kernels::serial::conv2d_valid(in, k, bias));
  }
}
BENCHMARK(BM_Conv<false>)->Name("conv3x3/serial")->Arg(32)->Arg(100);
BENCHMARK(BM_Conv<true>)->Name("conv3x3/parallel")->Arg(32)->Arg(100);

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const Tensor in = random_tensor({8, 32, 32}, 6), k = random_tensor({32, 8, 3, 3}, 7), up = random_tensor({32, 30, 30}, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? kernels::conv2d_valid_backward(in, k, up)
                                      : kernels::serial::conv2d_valid_backward(in, k, up));
  }
}
BENCHMARK(BM_ConvBackward<false>)->Name("conv3x3_backward/serial");
BENCHMARK(BM_ConvBackward<true>)->Name("conv3x3_backward/parallel");

// MC-dropout scoring of a pool: 20 passes of the desk-size dense network.
template <bool Parallel>
void BM_McDropout(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  NetworkConfig cfg = NetworkConfig::desk_preset({8}, 5);
  RngStream s(9, 0);
  const Model m{cfg, init_params(cfg, s)};
  const Tensor pool = random_tensor({n, 8}, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc_dropout_predict(m, pool, 20, RngStream(11, 0), {}, Parallel));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_McDropout<false>)->Name("mc_dropout_score/serial")->Arg(1000);
BENCHMARK(BM_McDropout<true>)->Name("mc_dropout_score/parallel")->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
