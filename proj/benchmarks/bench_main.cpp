#include <benchmark/benchmark.h>

#include <random>

#include "countingdino/feature_source.hpp"
#include "countingdino/geometry.hpp"
#include "countingdino/matching.hpp"
#include "countingdino/pipeline.hpp"
#include "countingdino/tensorio.hpp"
#include "synthetic.hpp"

namespace {

using namespace cdino;

// Map sized like a ViT-L/14 export of a 384x576 image at k = 2.
void BM_Correlate(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto map = testing::random_map(rng, 28, 42, 1024);
    const PatchBox box{5, 5, 5 + side, 5 + side};
    const auto kernel = extract_kernel(map, box, elliptical_mask(box), true);
    for (auto _ : state) benchmark::DoNotOptimize(correlate(map, kernel));
    state.SetItemsProcessed(state.iterations() * 28 * 42);
}
BENCHMARK(BM_Correlate)->Arg(1)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_EllipticalMask(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto s = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(elliptical_mask({0, 0, side, side}, s));
}
BENCHMARK(BM_EllipticalMask)->Args({4, 0})->Args({16, 0})->Args({4, 32})->Args({16, 32});

void BM_Stitch(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const int k = static_cast<int>(state.range(0));
    const std::size_t n = std::size_t{1} << (2 * k);
    const std::size_t q = 28 >> k;
    std::vector<FeatureMap> quads;
    for (std::size_t i = 0; i < n; ++i) quads.push_back(testing::random_map(rng, q, q, 256));
    for (auto _ : state) benchmark::DoNotOptimize(stitch_quadrants(quads, k));
}
BENCHMARK(BM_Stitch)->Arg(1)->Arg(2);

void BM_CdfmRoundTrip(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto map = testing::random_map(rng, 28, 42, 1024);
    for (auto _ : state) benchmark::DoNotOptimize(decode_cdfm(encode_cdfm(map)));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(map.data().size_bytes()));
}
BENCHMARK(BM_CdfmRoundTrip)->Unit(benchmark::kMillisecond);

void BM_PipelineThreeExemplars(benchmark::State& state) {
    testing::PlantedOptions opts;
    opts.channels = 1024;
    opts.noise = 0.1;
    const auto scene = testing::planted_scene(static_cast<std::size_t>(state.range(0)), 4, opts);
    PipelineConfig cfg;
    cfg.resolution_level = 0;
    for (auto _ : state) benchmark::DoNotOptimize(count_features(scene.map, scene.objects, cfg));
}
BENCHMARK(BM_PipelineThreeExemplars)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
