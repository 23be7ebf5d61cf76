// Parallel kernels vs their serial reference twins on training-sized shapes.

#include <benchmark/benchmark.h>

#include "shiftlab/layers.hpp"
#include "shiftlab/reference.hpp"
#include "shiftlab/rng.hpp"
#include "shiftlab/tensor.hpp"

namespace {

using shiftlab::Rng;
using shiftlab::Tensor;

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_real(-1.0, 1.0);
  return t;
}

struct ConvCase {
  Tensor x, w, b;
  std::size_t stride, padding;
};

ConvCase conv_case(std::size_t batch, std::size_t cin, std::size_t cout, std::size_t hw,
                   std::size_t stride) {
  return ConvCase{random_tensor({batch, cin, hw, hw}, 1),
                  random_tensor({cout, cin, 3, 3}, 2), random_tensor({cout}, 3), stride, 1};
}

void BM_conv2d_parallel(benchmark::State& state) {
  const ConvCase c = conv_case(16, 8, 16, 40, 1);
  for (auto _ : state) {
    Tensor out = shiftlab::conv2d(c.x, c.w, c.b, c.stride, c.padding);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_conv2d_parallel);

void BM_conv2d_serial(benchmark::State& state) {
  const ConvCase c = conv_case(16, 8, 16, 40, 1);
  for (auto _ : state) {
    Tensor out = shiftlab::reference::conv2d(c.x, c.w, c.b, c.stride, c.padding);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_conv2d_serial);

void BM_maxpool_parallel(benchmark::State& state) {
  const Tensor x = random_tensor({32, 16, 40, 40}, 4);
  for (auto _ : state) {
    Tensor out = shiftlab::maxpool2d(x, 2, 2, 0);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_maxpool_parallel);

void BM_maxpool_serial(benchmark::State& state) {
  const Tensor x = random_tensor({32, 16, 40, 40}, 4);
  for (auto _ : state) {
    Tensor out = shiftlab::reference::maxpool2d(x, 2, 2, 0);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_maxpool_serial);

void BM_blur_parallel(benchmark::State& state) {
  const Tensor x = random_tensor({32, 16, 40, 40}, 5);
  for (auto _ : state) {
    Tensor out = shiftlab::blur_downsample2d(x, 2);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_blur_parallel);

void BM_blur_serial(benchmark::State& state) {
  const Tensor x = random_tensor({32, 16, 40, 40}, 5);
  for (auto _ : state) {
    Tensor out = shiftlab::reference::blur_downsample2d(x, 2);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_blur_serial);

void BM_dense_parallel(benchmark::State& state) {
  const Tensor x = random_tensor({128, 4096}, 6);
  const Tensor w = random_tensor({4096, 10}, 7);
  const Tensor b = random_tensor({10}, 8);
  for (auto _ : state) {
    Tensor out = shiftlab::dense(x, w, b);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_dense_parallel);

void BM_dense_serial(benchmark::State& state) {
  const Tensor x = random_tensor({128, 4096}, 6);
  const Tensor w = random_tensor({4096, 10}, 7);
  const Tensor b = random_tensor({10}, 8);
  for (auto _ : state) {
    Tensor out = shiftlab::reference::dense(x, w, b);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_dense_serial);

}  // namespace

BENCHMARK_MAIN();
