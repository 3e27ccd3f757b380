#include <benchmark/benchmark.h>

#include "detdsci/ingest.hpp"

namespace {

using namespace detdsci;

void BM_PlanWindows(benchmark::State& state)
{
    const int stride = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ingest::plan_windows(25600, 25600, stride));
    }
}
BENCHMARK(BM_PlanWindows)->Arg(2000)->Arg(500)->Arg(100);

void BM_ExtractCrop(benchmark::State& state)
{
    ingest::Mosaic mosaic{geo::ZoomLevel(18), geo::TileCoord(geo::ZoomLevel(18), 100, 100), Raster(2560, 2560)};
    mosaic.pixels.fill(40, 90, 140);
    const auto windows = ingest::plan_windows(mosaic.width(), mosaic.height(), 2000);
    std::size_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ingest::extract_crop(mosaic, windows[k++ % windows.size()]));
    }
    state.SetBytesProcessed(state.iterations() * ingest::kCropSize * ingest::kCropSize * Raster::kChannels);
}
BENCHMARK(BM_ExtractCrop)->Unit(benchmark::kMillisecond);

}  // namespace
