// OpenMP kernels against the serial reference loops at desk-preset shapes
// (batch 16, 16 channels, 32x32 maps).

#include <benchmark/benchmark.h>

#include "soap/nnkernel.hpp"
#include "soap/rng.hpp"

namespace {

using soap::nn::Tensor;

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  soap::Rng rng(seed);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

struct ConvCase {
  Tensor x, w, b, gy;
  explicit ConvCase(int k)
      : x(random_tensor({16, 16, 32, 32}, 1)),
        w(random_tensor({16, 16, k, k}, 2)),
        b(random_tensor({16}, 3)),
        gy(random_tensor({16, 16, 32, 32}, 4)) {}
};

template <bool Parallel>
void conv_forward(benchmark::State& state) {
  ConvCase c(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto y = Parallel ? soap::nn::conv2d(c.x, c.w, &c.b) : soap::nn::reference::conv2d(c.x, c.w, &c.b);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void conv_backward(benchmark::State& state) {
  ConvCase c(static_cast<int>(state.range(0)));
  Tensor gx(c.x.shape()), gw(c.w.shape()), gb(c.b.shape());
  for (auto _ : state) {
    if (Parallel)
      soap::nn::conv2d_backward(c.x, c.w, c.gy, &gx, &gw, &gb);
    else
      soap::nn::reference::conv2d_backward(c.x, c.w, c.gy, &gx, &gw, &gb);
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void maxpool(benchmark::State& state) {
  const auto x = random_tensor({16, 16, 32, 32}, 5);
  for (auto _ : state) {
    auto y = Parallel ? soap::nn::maxpool3x3(x) : soap::nn::reference::maxpool3x3(x);
    benchmark::DoNotOptimize(y.y.data());
  }
}

}  // namespace

BENCHMARK(conv_forward<true>)->Name("conv2d_forward/openmp")->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(conv_forward<false>)->Name("conv2d_forward/reference")->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<true>)->Name("conv2d_backward/openmp")->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<false>)->Name("conv2d_backward/reference")->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(maxpool<true>)->Name("maxpool3x3/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(maxpool<false>)->Name("maxpool3x3/reference")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
