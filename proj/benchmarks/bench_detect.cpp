#include <benchmark/benchmark.h>

#include <random>

#include "detdsci/detect.hpp"
#include "detdsci/eval.hpp"

namespace {

using namespace detdsci;

std::vector<detect::GlobalDetection> clustered(std::size_t n)
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pos(0.0, 4000.0);
    std::uniform_real_distribution<double> jitter(-8.0, 8.0);
    std::uniform_real_distribution<double> score(0.05, 1.0);
    std::vector<detect::GlobalDetection> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (i % 4 == 0) ? pos(rng) : out.empty() ? pos(rng) : out.back().bbox_mosaic.x_min + jitter(rng);
        const double y = (i % 4 == 0) ? pos(rng) : out.empty() ? pos(rng) : out.back().bbox_mosaic.y_min + jitter(rng);
        detect::GlobalDetection d;
        d.label = (i % 3 == 0) ? "ship" : "plane";
        d.score = score(rng);
        d.bbox_mosaic = {x, y, x + 60.0, y + 40.0};
        d.zoom = 19;
        d.detector_id = "SMALL";
        out.push_back(d);
    }
    return out;
}

void BM_Iou(benchmark::State& state)
{
    const BBox a{10, 10, 70, 50};
    const BBox b{30, 20, 90, 80};
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval::iou(a, b));
    }
}
BENCHMARK(BM_Iou);

void BM_MergeNms(benchmark::State& state)
{
    const auto dets = clustered(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(detect::merge_nms(dets));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MergeNms)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

}  // namespace
