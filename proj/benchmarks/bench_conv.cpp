#include "jsvd/conv.hpp"
#include "jsvd/decompose.hpp"
#include "jsvd/linalg.hpp"
#include "jsvd/random.hpp"
#include "jsvd/tensor.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace jsvd;

Tensor4 random_kernel(Shape4 shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor4 w(shape);
    fill_uniform(w.data(), rng);
    return w;
}

FeatureMap random_input(int h, int w, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FeatureMap x(h, w, c);
    fill_uniform(x.data, rng);
    return x;
}

void BM_DirectConv(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const Tensor4 w = random_kernel({3, 3, c, c}, 1);
    const FeatureMap x = random_input(32, 32, c, 2);
    for (auto _ : state) {
        FeatureMap y = conv2d(x, w, 1, 1);
        benchmark::DoNotOptimize(y.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 32 * 32 * 9 * c * c);
}
BENCHMARK(BM_DirectConv)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

// Factored path at a quarter of the full rank, the regime the compression
// targets. items/sec counts the direct-equivalent MACs so the two benches
// are comparable.
void BM_SplitConv(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const Tensor4 w = random_kernel({3, 3, c, c}, 1);
    const FeatureMap x = random_input(32, 32, c, 2);
    const int rank = std::max(1, (3 * c) / 4);
    TruncatedPair f = svd_truncated(unfold(w), rank);
    const Tensor4 u = fold_vertical_factor(f.u, w.shape());
    const Tensor4 v = fold_horizontal_factor(f.v, w.shape());
    for (auto _ : state) {
        FeatureMap y = forward_split(x, u, v, 1);
        benchmark::DoNotOptimize(y.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 32 * 32 * 9 * c * c);
}
BENCHMARK(BM_SplitConv)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_StridedSplit(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const Tensor4 w = random_kernel({3, 3, c, c}, 3);
    const FeatureMap x = random_input(32, 32, c, 4);
    const int rank = std::max(1, (3 * c) / 4);
    TruncatedPair f = svd_truncated(unfold(w), rank);
    const Tensor4 u = fold_vertical_factor(f.u, w.shape());
    const Tensor4 v = fold_horizontal_factor(f.v, w.shape());
    for (auto _ : state) {
        FeatureMap y = forward_split(x, u, v, 2);
        benchmark::DoNotOptimize(y.data.data());
    }
}
BENCHMARK(BM_StridedSplit)->Arg(16)->Arg(64);

} // namespace

BENCHMARK_MAIN();
