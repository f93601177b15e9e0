#include <benchmark/benchmark.h>

#include "emap/tensor/gemm.hpp"
#include "emap/tensor/kernels.hpp"
#include "emap/util/rng.hpp"

namespace {

emap::Tensor random_tensor(emap::Shape shape, std::uint64_t seed) {
  emap::Rng rng(seed);
  emap::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// args: batch, cin, cout, spatial extent
void BM_Conv5x5Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  const auto s = static_cast<std::size_t>(state.range(3));
  const auto x = random_tensor({n, cin, s, s}, 1);
  const auto w = random_tensor({cout, cin, 5, 5}, 2);
  const auto b = random_tensor({cout}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(emap::kernels::conv2d(x, w, b, {}));
  state.counters["GMAC/s"] = benchmark::Counter(static_cast<double>(n * cin * cout * 25 * s * s) * 1e-9,
                                                benchmark::Counter::kIsIterationInvariantRate);
}

void BM_Conv5x5Backward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  const auto s = static_cast<std::size_t>(state.range(3));
  const auto x = random_tensor({n, cin, s, s}, 1);
  const auto w = random_tensor({cout, cin, 5, 5}, 2);
  const auto dy = random_tensor({n, cout, s, s}, 4);
  for (auto _ : state) {
    emap::Tensor dx(x.shape()), dw(w.shape()), db({cout});
    emap::kernels::conv2d_backward(x, w, dy, {}, &dx, &dw, &db);
    benchmark::DoNotOptimize(dx);
  }
  state.counters["GMAC/s"] = benchmark::Counter(static_cast<double>(2 * n * cin * cout * 25 * s * s) * 1e-9,
                                                benchmark::Counter::kIsIterationInvariantRate);
}

void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_tensor({m, k}, 5);
  const auto b = random_tensor({k, n}, 6);
  emap::Tensor c({m, n});
  for (auto _ : state)
    emap::gemm<float>(m, n, k, emap::MatrixView<float>::row_major(a.raw(), k),
                      emap::MatrixView<float>::row_major(b.raw(), n), c.raw(), n, false);
  state.counters["GMAC/s"] = benchmark::Counter(static_cast<double>(m * n * k) * 1e-9,
                                                benchmark::Counter::kIsIterationInvariantRate);
}

}  // namespace

BENCHMARK(BM_Gemm)->Args({16, 400, 4096})->Args({128, 3200, 4096})->Args({4, 100, 4096});
BENCHMARK(BM_Conv5x5Forward)
    ->Args({8, 4, 4, 64})
    ->Args({8, 20, 16, 64})
    ->Args({8, 16, 16, 64})
    ->Args({8, 12, 8, 64})
    ->Args({8, 16, 1, 64});
BENCHMARK(BM_Conv5x5Backward)->Args({8, 4, 4, 64})->Args({8, 20, 16, 64})->Args({8, 16, 16, 64})->Args({8, 16, 1, 64});

BENCHMARK_MAIN();
