#include <benchmark/benchmark.h>

#include "wmm/nn.hpp"
#include "wmm/stats.hpp"
#include "wmm/wmm_ops.hpp"

using namespace wmm;

namespace {

void BM_Reinitialize(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    WeightMatrix w = uniform_init(n, n, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(reinitialize(w.ref(), 0.3, 0.35, rng).count());
    }
}
BENCHMARK(BM_Reinitialize)->Arg(32)->Arg(128)->Arg(512);

void BM_Shuffle(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    WeightMatrix w = uniform_init(n, n, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(shuffle(w.ref(), 0.35, 0.5, rng).count());
    }
}
BENCHMARK(BM_Shuffle)->Arg(32)->Arg(128)->Arg(512);

void BM_Entropy(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    const WeightMatrix w = uniform_init(n, n, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(weight_entropy(w.cref()));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(w.size()));
}
BENCHMARK(BM_Entropy)->Arg(32)->Arg(128)->Arg(512);

// One forward and backward pass of an 8-unit LSTM over a 50-step window.
void BM_LstmStep(benchmark::State& state) {
    const auto batch = static_cast<Eigen::Index>(state.range(0));
    const std::size_t h = 8;
    Rng rng(4);
    const LstmCell cell{uniform_init(4 * h, 1, rng), uniform_init(4 * h, h, rng), std::vector<double>(4 * h)};
    std::vector<Mat> xs(50, Mat::Random(batch, 1));
    std::vector<Mat> dh(50, Mat::Constant(batch, static_cast<Eigen::Index>(h), 0.01));
    for (auto _ : state) {
        LstmCache cache;
        lstm_forward(cell, xs, &cache);
        benchmark::DoNotOptimize(lstm_backward(cell, cache, dh).d_wx.sum());
    }
}
BENCHMARK(BM_LstmStep)->Arg(1)->Arg(32);

} // namespace

BENCHMARK_MAIN();
