// OpenMP kernels against the serial reference, on layer shapes of the
// standard network at 300x300 input (batch 4).
#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "weedctx/kernels.hpp"
#include "weedctx/random.hpp"

using namespace weedctx;
using namespace weedctx::kernels;

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// args: spatial size, cin, cout
ConvShape conv_shape(const benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  return {4, hw, hw, static_cast<int>(state.range(1)), static_cast<int>(state.range(2))};
}

std::size_t conv_in(const ConvShape& s) { return static_cast<std::size_t>(s.n) * s.h * s.w * s.cin; }
std::size_t conv_out(const ConvShape& s) { return static_cast<std::size_t>(s.n) * s.h * s.w * s.cout; }

template <bool Omp>
void BM_ConvForward(benchmark::State& state) {
  const ConvShape s = conv_shape(state);
  const auto in = random_values(conv_in(s), 1);
  const auto w = random_values(s.weight_size(), 2);
  const auto b = random_values(static_cast<std::size_t>(s.cout), 3);
  std::vector<float> out(conv_out(s));
  for (auto _ : state) {
    if constexpr (Omp) {
      conv3x3_forward<float>(s, in, w, b, out);
    } else {
      reference::conv3x3_forward<float>(s, in, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * s.n);
}

template <bool Omp>
void BM_ConvBackward(benchmark::State& state) {
  const ConvShape s = conv_shape(state);
  const auto in = random_values(conv_in(s), 1);
  const auto w = random_values(s.weight_size(), 2);
  const auto dout = random_values(conv_out(s), 3);
  std::vector<float> din(conv_in(s)), dw(s.weight_size()), db(static_cast<std::size_t>(s.cout));
  for (auto _ : state) {
    if constexpr (Omp) {
      conv3x3_backward<float>(s, in, w, dout, din, dw, db);
    } else {
      reference::conv3x3_backward<float>(s, in, w, dout, din, dw, db);
    }
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * s.n);
}

template <bool Omp>
void BM_MaxPool(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const PoolShape s{4, hw, hw, static_cast<int>(state.range(1))};
  const auto in = random_values(static_cast<std::size_t>(s.n) * hw * hw * s.c, 4);
  const std::size_t out_n = s.out_size();
  std::vector<float> out(out_n);
  std::vector<std::int32_t> arg(out_n);
  for (auto _ : state) {
    if constexpr (Omp) {
      maxpool2_forward<float>(s, in, out, arg);
    } else {
      reference::maxpool2_forward<float>(s, in, out, arg);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Omp>
void BM_Dense(benchmark::State& state) {
  const DenseShape s{32, static_cast<int>(state.range(0)), static_cast<int>(state.range(1))};
  const auto x = random_values(static_cast<std::size_t>(s.n) * s.in, 5);
  const auto w = random_values(static_cast<std::size_t>(s.in) * s.out, 6);
  const auto b = random_values(static_cast<std::size_t>(s.out), 7);
  const auto dy = random_values(static_cast<std::size_t>(s.n) * s.out, 8);
  std::vector<float> y(static_cast<std::size_t>(s.n) * s.out), dx(x.size()), dw(w.size()), db(b.size());
  for (auto _ : state) {
    if constexpr (Omp) {
      dense_forward<float>(s, x, w, b, y);
      dense_backward<float>(s, x, w, dy, dx, dw, db);
    } else {
      reference::dense_forward<float>(s, x, w, b, y);
      reference::dense_backward<float>(s, x, w, dy, dx, dw, db);
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({300, 3, 32})->Args({150, 32, 64})->Args({75, 64, 128})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK_TEMPLATE(BM_ConvForward, false)->Apply(conv_args)->Name("conv_forward/reference");
BENCHMARK_TEMPLATE(BM_ConvForward, true)->Apply(conv_args)->Name("conv_forward/omp");
BENCHMARK_TEMPLATE(BM_ConvBackward, false)->Apply(conv_args)->Name("conv_backward/reference");
BENCHMARK_TEMPLATE(BM_ConvBackward, true)->Apply(conv_args)->Name("conv_backward/omp");
BENCHMARK_TEMPLATE(BM_MaxPool, false)->Args({300, 32})->Args({150, 64})->Name("maxpool/reference");
BENCHMARK_TEMPLATE(BM_MaxPool, true)->Args({300, 32})->Args({150, 64})->Name("maxpool/omp");
BENCHMARK_TEMPLATE(BM_Dense, false)->Args({37 * 37 * 128, 64})->Args({64, 1})->Name("dense/reference");
BENCHMARK_TEMPLATE(BM_Dense, true)->Args({37 * 37 * 128, 64})->Args({64, 1})->Name("dense/omp");

int main(int argc, char** argv) {
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
