// Microbenchmarks for the hot autodiff ops at working-set sizes the desk
// profile actually hits.

#include <benchmark/benchmark.h>

#include "litevl/attention.hpp"
#include "litevl/graph.hpp"
#include "litevl/ops.hpp"
#include "litevl/rng.hpp"
#include "litevl/tensor.hpp"

namespace {

using litevl::make_const;
using litevl::make_param;
using litevl::Rng;
using litevl::Tensor;
using litevl::Var;
namespace ops = litevl::ops;

Var<float> random_matrix(Rng& rng, std::size_t rows, std::size_t cols, bool param) {
  auto t = litevl::normal_tensor<float>(rng, {rows, cols}, 1.0);
  return param ? make_param(std::move(t)) : make_const(std::move(t));
}

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto a = random_matrix(rng, n, n, false);
  auto b = random_matrix(rng, n, n, false);
  for (auto _ : state) {
    auto c = ops::matmul(a, b);
    benchmark::DoNotOptimize(c.value()[0]);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulForward)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto a = random_matrix(rng, n, n, true);
  auto b = random_matrix(rng, n, n, true);
  for (auto _ : state) {
    auto loss = ops::mean_all(ops::matmul(a, b));
    litevl::backward(loss);
    benchmark::DoNotOptimize(a.grad()[0]);
  }
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_SoftmaxRows(benchmark::State& state) {
  Rng rng(2);
  auto x = random_matrix(rng, 64, 256, false);
  for (auto _ : state) {
    auto y = ops::softmax_rows(x, 1.0f);
    benchmark::DoNotOptimize(y.value()[0]);
  }
}
BENCHMARK(BM_SoftmaxRows);

void BM_LayerNormForwardBackward(benchmark::State& state) {
  Rng rng(3);
  auto x = random_matrix(rng, 65, 64, true);
  auto gain = make_param(litevl::normal_tensor<float>(rng, {64}, 0.02));
  auto bias = make_param(Tensor<float>({64}));
  for (auto _ : state) {
    auto loss = ops::mean_all(ops::layer_norm(x, gain, bias));
    litevl::backward(loss);
    benchmark::DoNotOptimize(x.grad()[0]);
  }
}
BENCHMARK(BM_LayerNormForwardBackward);

void BM_CrossEntropy(benchmark::State& state) {
  Rng rng(4);
  auto logits = random_matrix(rng, 48, 64, true);
  std::vector<std::size_t> labels(48);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 64;
  for (auto _ : state) {
    auto loss = ops::cross_entropy_with_indices(logits, labels);
    litevl::backward(loss);
    benchmark::DoNotOptimize(logits.grad()[0]);
  }
}
BENCHMARK(BM_CrossEntropy);

}  // namespace

BENCHMARK_MAIN();
