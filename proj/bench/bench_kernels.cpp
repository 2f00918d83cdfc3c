// Production kernels against their serial references.
#include <benchmark/benchmark.h>

#include <algorithm>
#include <vector>

#include "socsim/rng.hpp"
#include "socsim/sandpile.hpp"
#include "socsim/sonify/corpus.hpp"
#include "socsim/sonify/render.hpp"
#include "socsim/springblock.hpp"

using namespace soc;

namespace {

// An all-3 pile plus one grain in the centre: one avalanche that sweeps the whole lattice.
Sandpile saturated(int L) {
    Grid<std::int32_t> z(L, L);
    std::fill(z.values().begin(), z.values().end(), 3);
    return Sandpile::from_grid(std::move(z), 4);
}

void BM_SandpileAvalanche(benchmark::State& state) {
    const int L = static_cast<int>(state.range(0));
    const Sandpile start = saturated(L);
    std::uint64_t topplings = 0;
    for (auto _ : state) {
        Sandpile p = start;
        topplings = p.add_grain({L / 2, L / 2}).size;
    }
    state.counters["topplings"] = double(topplings);
}

void BM_SandpileAvalancheReference(benchmark::State& state) {
    const int L = static_cast<int>(state.range(0));
    const Sandpile start = saturated(L);
    for (auto _ : state) {
        Sandpile p = start;
        benchmark::DoNotOptimize(p.add_grain_reference({L / 2, L / 2}));
    }
}

// Steady-state driving: mostly small avalanches on a large lattice.
Sandpile warmed_pile(int L) {
    Sandpile p(L, L, 4, 1);
    for (int i = 0; i < 3 * L * L; ++i) p.add_grain(p.random_site());
    return p;
}

void BM_SandpileDrive(benchmark::State& state) {
    Sandpile p = warmed_pile(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(p.add_grain(p.random_site()));
}

void BM_SandpileDriveReference(benchmark::State& state) {
    Sandpile p = warmed_pile(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(p.add_grain_reference(p.random_site()));
}

// A warmed OFC lattice stepped by a plate increment large enough to set off a big quake.
SpringBlock warmed_ofc(int L) {
    SpringBlock m(L, 0.25, 1);
    for (int i = 0; i < 4 * L * L; ++i) m.drive_extremal();
    return m;
}

void BM_OfcLoadStep(benchmark::State& state) {
    const SpringBlock start = warmed_ofc(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        SpringBlock m = start;
        benchmark::DoNotOptimize(m.load_step(0.05));
    }
}

void BM_OfcLoadStepReference(benchmark::State& state) {
    const SpringBlock start = warmed_ofc(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        SpringBlock m = start;
        benchmark::DoNotOptimize(m.load_step_reference(0.05));
    }
}

std::vector<double> random_values(std::size_t n) {
    Rng rng(3);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform();
    return v;
}

void BM_MaxValue(benchmark::State& state) {
    const auto v = random_values(std::size_t(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::max_value(v));
}

void BM_MaxValueReference(benchmark::State& state) {
    const auto v = random_values(std::size_t(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::max_value_reference(v));
}

struct GrainSetup {
    sonify::Audio audio = sonify::make_crackle(4.0, 48000, 2);
    std::vector<std::size_t> offsets;
    std::size_t length = 3840;
    GrainSetup() {
        for (std::size_t at = 0; at + length <= audio.samples.size(); at += 960) offsets.push_back(at);
    }
};

void BM_AnalyzeGrains(benchmark::State& state) {
    const GrainSetup g;
    for (auto _ : state)
        benchmark::DoNotOptimize(sonify::kernels::analyze_grains(g.audio.samples, g.offsets, g.length, 48000));
    state.SetItemsProcessed(state.iterations() * std::int64_t(g.offsets.size()));
}

void BM_AnalyzeGrainsReference(benchmark::State& state) {
    const GrainSetup g;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            sonify::kernels::analyze_grains_reference(g.audio.samples, g.offsets, g.length, 48000));
    state.SetItemsProcessed(state.iterations() * std::int64_t(g.offsets.size()));
}

sonify::GrainSchedule dense_schedule(const sonify::GrainCorpus& corpus) {
    Rng rng(5);
    sonify::GrainSchedule s;
    s.total_duration = 4.0;
    for (int i = 0; i < 4000; ++i)
        s.entries.push_back({rng.uniform(0.0, 4.0), std::size_t(rng.below(corpus.grains.size())),
                             rng.uniform(0.01, 0.5), rng.uniform(0.5, 2.0)});
    std::sort(s.entries.begin(), s.entries.end(), [](auto& a, auto& b) { return a.onset < b.onset; });
    return s;
}

void BM_Render(benchmark::State& state) {
    const auto corpus = sonify::ingest_corpus(sonify::make_crackle(2.0, 48000, 1));
    const auto s = dense_schedule(corpus);
    for (auto _ : state) benchmark::DoNotOptimize(sonify::render(s, corpus, 48000));
}

void BM_RenderReference(benchmark::State& state) {
    const auto corpus = sonify::ingest_corpus(sonify::make_crackle(2.0, 48000, 1));
    const auto s = dense_schedule(corpus);
    for (auto _ : state) benchmark::DoNotOptimize(sonify::render_reference(s, corpus, 48000));
}

}  // namespace

BENCHMARK(BM_SandpileAvalanche)->Arg(33)->Arg(65)->Arg(129)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SandpileAvalancheReference)->Arg(33)->Arg(65)->Arg(129)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SandpileDrive)->Arg(64)->Arg(256);
BENCHMARK(BM_SandpileDriveReference)->Arg(64)->Arg(256);
BENCHMARK(BM_OfcLoadStep)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OfcLoadStepReference)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxValue)->Arg(1 << 12)->Arg(1 << 20);
BENCHMARK(BM_MaxValueReference)->Arg(1 << 12)->Arg(1 << 20);
BENCHMARK(BM_AnalyzeGrains)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AnalyzeGrainsReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderReference)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
