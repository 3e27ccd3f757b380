#include <benchmark/benchmark.h>

#include <random>

#include "detdsci/eval.hpp"
#include "eval_cases.hpp"

namespace {

using namespace detdsci;

struct Corpus {
    std::vector<dataset::AnnotatedImage> gt;
    eval::ImageDetections dets;
};

Corpus corpus(std::size_t images)
{
    std::mt19937 rng(11);
    Corpus c;
    for (std::size_t i = 0; i < images; ++i) {
        const std::string ref = "img_" + std::to_string(i);
        auto rc = testing::random_case(rng);
        c.gt.push_back({ref, geo::ZoomLevel(19), rc.gts, dataset::Source::GoogleMaps});
        c.dets[ref] = rc.dets;
    }
    return c;
}

void BM_Match(benchmark::State& state)
{
    std::mt19937 rng(3);
    std::vector<testing::RandomCase> cases;
    for (int i = 0; i < 256; ++i) cases.push_back(testing::random_case(rng));
    std::size_t k = 0;
    for (auto _ : state) {
        const auto& c = cases[k++ % cases.size()];
        benchmark::DoNotOptimize(eval::match(c.dets, c.gts, 0.5));
    }
}
BENCHMARK(BM_Match);

void BM_Evaluate(benchmark::State& state)
{
    const Corpus c = corpus(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval::evaluate(c.gt, c.dets));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
