#include <benchmark/benchmark.h>

#include <vector>

#include "qmcgsa/diffusion.hpp"
#include "qmcgsa/gsa.hpp"
#include "qmcgsa/instruments.hpp"
#include "qmcgsa/normal.hpp"
#include "qmcgsa/sequence.hpp"

using namespace qmcgsa;

static void BM_SobolNext(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    SobolSequence s(d);
    std::vector<double> p(d);
    for (auto _ : state) {
        if (s.index() + 1 >= SobolSequence::kMaxPoints) s = SobolSequence(d);
        s.next(p);
        benchmark::DoNotOptimize(p.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d));
}
BENCHMARK(BM_SobolNext)->Arg(32)->Arg(252);

static void BM_SobolSkip(benchmark::State& state) {
    SobolSequence s(32);
    for (auto _ : state) {
        s = SobolSequence(32);
        s.skip(1'000'000);
        benchmark::DoNotOptimize(s.index());
    }
}
BENCHMARK(BM_SobolSkip);

static void BM_InverseNormal(benchmark::State& state) {
    std::vector<double> u(4096), z(4096);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = (static_cast<double>(i) + 0.5) / 4096.0;
    for (auto _ : state) {
        to_normals(u, z);
        benchmark::DoNotOptimize(z.data());
    }
    state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_InverseNormal);

static void BM_PathSd(benchmark::State& state) {
    const auto grid = TimeGrid::uniform(1.0, static_cast<std::size_t>(state.range(0)));
    std::vector<double> z(grid.size(), 0.3), w(grid.size());
    for (auto _ : state) {
        path_sd(z, grid, w);
        benchmark::DoNotOptimize(w.data());
    }
}
BENCHMARK(BM_PathSd)->Arg(32)->Arg(252);

static void BM_PathBbd(benchmark::State& state) {
    const auto grid = TimeGrid::uniform(1.0, static_cast<std::size_t>(state.range(0)));
    const BrownianBridge bridge(grid);
    std::vector<double> z(grid.size(), 0.3), w(grid.size());
    for (auto _ : state) {
        path_bbd(z, bridge, w);
        benchmark::DoNotOptimize(w.data());
    }
}
BENCHMARK(BM_PathBbd)->Arg(32)->Arg(252);

static void BM_Price(benchmark::State& state) {
    const auto method = static_cast<Method>(state.range(0));
    const InstrumentSpec specs[] = {InstrumentSpec::european(), InstrumentSpec::asian_geometric(),
                                    InstrumentSpec::double_knock_out(), InstrumentSpec::cliquet()};
    const auto& spec = specs[state.range(1)];
    const auto grid = TimeGrid::uniform(1.0, 32);
    constexpr std::uint64_t n = 1 << 14;
    for (auto _ : state) benchmark::DoNotOptimize(price(spec, ModelParams{}, grid, method, n).value);
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Price)->ArgsProduct({{0, 1, 2}, {0, 1, 2, 3}})->Unit(benchmark::kMillisecond);

static void BM_GsaIndices(benchmark::State& state) {
    const auto grid = TimeGrid::uniform(1.0, 32);
    OptionFunctional f(InstrumentSpec::european(), ModelParams{}, grid, Scheme::BrownianBridge);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_indices(f, 1 << 12).d_a);
    state.SetItemsProcessed(state.iterations() * (1 << 12) * 34);
}
BENCHMARK(BM_GsaIndices)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
