#include <benchmark/benchmark.h>

#include "ellreg/data.hpp"
#include "ellreg/kernels.hpp"
#include "ellreg/nn.hpp"
#include "ellreg/sde.hpp"

namespace {

using ellreg::ExecPolicy;

ExecPolicy policy_of(const benchmark::State& state) {
    return state.range(0) ? ExecPolicy::Parallel : ExecPolicy::Serial;
}

void BM_PairwiseDistances(benchmark::State& state) {
    const auto data = ellreg::two_moons(static_cast<std::size_t>(state.range(1)), 0.1, {1, 0});
    for (auto _ : state) {
        benchmark::DoNotOptimize(ellreg::pairwise_distances(data.features, policy_of(state)));
    }
}
BENCHMARK(BM_PairwiseDistances)->ArgsProduct({{0, 1}, {256, 1024}});

void BM_WeightedLossGradient(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(1));
    const auto data = ellreg::synthetic_sine(n, 0.1, {2, 0});
    const auto model = ellreg::Mlp::initialized({1, 32, 32, 1}, ellreg::Activation::ReLU,
                                                ellreg::OutputHead::Linear, {3, 0});
    const std::vector<double> w(n, 1.0 / static_cast<double>(n));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ellreg::weighted_loss_gradient(
            ellreg::LossKind::MeanSquaredError, model, data.features, data.targets, w, 1.0, policy_of(state)));
    }
}
BENCHMARK(BM_WeightedLossGradient)->ArgsProduct({{0, 1}, {1024, 8192}});

void BM_RunWalks(benchmark::State& state) {
    const auto data = ellreg::two_moons(200, 0.1, {4, 0});
    const ellreg::Matrix centers = data.joint();
    const auto box = ellreg::Box::bounding(centers, 0.1);
    const auto queries = ellreg::two_moons(8, 0.2, {5, 0}).joint();
    ellreg::Matrix starts(0, centers.cols());
    std::vector<std::size_t> inside;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        if (box.contains(queries.row(q))) inside.push_back(q);
    }
    starts = queries.select_rows(inside);
    ellreg::WalkSettings ws;
    ws.eps = 0.1;
    ws.dt = 1e-3;
    ws.t_max = 2.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ellreg::run_walks(starts, static_cast<std::size_t>(state.range(1)),
                                                   centers, box, ws, {6, 0}, policy_of(state)));
    }
}
BENCHMARK(BM_RunWalks)->ArgsProduct({{0, 1}, {64}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
