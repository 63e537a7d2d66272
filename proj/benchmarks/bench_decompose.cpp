#include "jsvd/decompose.hpp"
#include "jsvd/random.hpp"
#include "jsvd/tensor.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace jsvd;

LayerGroup random_group(int n, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LayerGroup g;
    for (int i = 0; i < n; ++i) {
        Tensor4 w(Shape4{3, 3, c, c});
        fill_uniform(w.data(), rng);
        g.members.push_back({"w" + std::to_string(i), std::move(w)});
    }
    return g;
}

void BM_Rjsvd(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const LayerGroup g = random_group(4, c, 5);
    const int rank = (3 * c) / 4;
    for (auto _ : state) {
        RightSharedFactorization f = rjsvd(g, rank);
        benchmark::DoNotOptimize(f.residual_sq);
    }
}
BENCHMARK(BM_Rjsvd)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_Ljsvd(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const LayerGroup g = random_group(4, c, 5);
    const int rank = (3 * c) / 4;
    for (auto _ : state) {
        LeftSharedFactorization f = ljsvd(g, rank);
        benchmark::DoNotOptimize(f.residual_sq);
    }
}
BENCHMARK(BM_Ljsvd)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

// Cost scales with the iteration count; the default used elsewhere is 30,
// trimmed here to keep the timing loop reasonable.
void BM_Bijsvd(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const LayerGroup g = random_group(4, c, 5);
    const int half = (3 * c) / 8;
    for (auto _ : state) {
        DualFactorization f = bijsvd(g, half, half, 10);
        benchmark::DoNotOptimize(f.objective_trace.back());
    }
}
BENCHMARK(BM_Bijsvd)->Arg(8)->Arg(16)->Arg(32);

} // namespace

BENCHMARK_MAIN();
