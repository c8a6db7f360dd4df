// Serial reference kernels against the OpenMP / GEMM implementations.

#include <benchmark/benchmark.h>

#include <random>

#include "gatector/defocus/defocus.hpp"
#include "gatector/kernels/kernels.hpp"

namespace {

using namespace gatector;
namespace ks = kernels::serial;
namespace kp = kernels::parallel;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1, 1);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// args: channels in, channels out, spatial size, kernel, stride
template <bool Parallel>
void BM_Conv2d(benchmark::State& state) {
  const int cin = state.range(0), cout = state.range(1), hw = state.range(2), k = state.range(3), s = state.range(4);
  const Tensor x = random_tensor({4, cin, hw, hw}, 1), w = random_tensor({cout, cin, k, k}, 2), b = random_tensor({cout}, 3);
  const kernels::ConvGeometry g{s, k / 2};
  for (auto _ : state) benchmark::DoNotOptimize(Parallel ? kp::conv2d(x, w, &b, g) : ks::conv2d(x, w, &b, g));
  const int out = kernels::conv_out_size(hw, k, s, k / 2);
  state.counters["MAC/s"] = benchmark::Counter(4.0 * cout * out * out * cin * k * k, benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Parallel>
void BM_Conv2dBackward(benchmark::State& state) {
  const int c = state.range(0), hw = state.range(1);
  const Tensor x = random_tensor({4, c, hw, hw}, 1), w = random_tensor({c, c, 3, 3}, 2);
  const kernels::ConvGeometry g{1, 1};
  const Tensor gy = random_tensor({4, c, hw, hw}, 3);
  Tensor gx, gw, gb;
  for (auto _ : state) {
    if (Parallel)
      kp::conv2d_backward(x, w, gy, g, &gx, &gw, &gb);
    else
      ks::conv2d_backward(x, w, gy, g, &gx, &gw, &gb);
    benchmark::DoNotOptimize(gx.data());
  }
}

template <bool Parallel>
void BM_Deconv(benchmark::State& state) {
  const int c = state.range(0), hw = state.range(1);
  const Tensor x = random_tensor({4, c, hw, hw}, 1), w = random_tensor({c, c / 2, 4, 4}, 2);
  const kernels::ConvGeometry g{2, 1};
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kp::conv_transpose2d(x, w, nullptr, g) : ks::conv_transpose2d(x, w, nullptr, g));
}

template <bool Parallel>
void BM_GroupNorm(benchmark::State& state) {
  const int c = state.range(0), hw = state.range(1);
  const Tensor x = random_tensor({4, c, hw, hw}, 1), gamma(Shape{c}, 1.0f), beta(Shape{c}, 0.0f);
  kernels::GroupNormCache cache;
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kp::group_norm(x, gamma, beta, 8, 1e-5f, &cache)
                                      : ks::group_norm(x, gamma, beta, 8, 1e-5f, &cache));
}

template <bool Parallel>
void BM_Resize(benchmark::State& state) {
  const int c = state.range(0), hw = state.range(1);
  const Tensor x = random_tensor({4, c, hw, hw}, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kp::resize_bilinear(x, 2 * hw, 2 * hw) : ks::resize_bilinear(x, 2 * hw, 2 * hw));
}

// upsampling by rearrangement, for comparison with BM_Resize
void BM_Defocus(benchmark::State& state) {
  const int c = state.range(0), hw = state.range(1);
  const Tensor x = random_tensor({4, c, hw, hw}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(defocus(x, 2));
}

#define CONV_ARGS ->Args({16, 16, 56, 3, 1})->Args({32, 64, 28, 3, 2})->Args({3, 16, 224, 7, 2})->Args({128, 64, 7, 1, 1})
BENCHMARK(BM_Conv2d<false>) CONV_ARGS->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2d<true>) CONV_ARGS->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dBackward<false>)->Args({16, 56})->Args({64, 14})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dBackward<true>)->Args({16, 56})->Args({64, 14})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Deconv<false>)->Args({64, 7})->Args({16, 28})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Deconv<true>)->Args({64, 7})->Args({16, 28})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GroupNorm<false>)->Args({16, 112})->Args({128, 7})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GroupNorm<true>)->Args({16, 112})->Args({128, 7})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Resize<false>)->Args({32, 14})->Args({8, 56})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Resize<true>)->Args({32, 14})->Args({8, 56})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Defocus)->Args({32, 14})->Args({8, 56})->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
