// Writes the inputs of the CLI smoke tests into one directory: tiles served
// through file:// URLs, pipeline configs, a manifest, detections and images.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "detdsci/annotations.hpp"
#include "detdsci/dataset.hpp"
#include "detdsci/eval.hpp"
#include "detdsci/geo.hpp"
#include "detdsci/image_codec.hpp"
#include "detdsci/pipeline.hpp"
#include "fake_transport.hpp"

namespace fs = std::filesystem;
using namespace detdsci;
using nlohmann::json;

namespace {

constexpr int kZoom = 18;
constexpr std::uint32_t kX0 = 131109;
constexpr std::uint32_t kY0 = 87392;
constexpr int kCols = 9;
constexpr int kRows = 8;

void write_json(const fs::path& path, const json& doc)
{
    std::ofstream(path) << doc.dump(2) << '\n';
}

json centre(std::uint32_t x, std::uint32_t y)
{
    const auto p = geo::pixel_to_geo({(x + 0.5) * geo::kTileSize, (y + 0.5) * geo::kTileSize}, geo::ZoomLevel(kZoom));
    return {{"lat", p.latitude}, {"lon", p.longitude}};
}

json config(const fs::path& dir, const json& small_script)
{
    return {
        {"tile_source",
         {{"url_template", "file://" + (dir / "tiles/{z}/{x}/{y}.png").string()},
          {"rate_limit", 0},
          {"retry", {{"max_attempts", 1}, {"backoff_ms", 0}}}}},
        {"region", {{"north_west", centre(kX0, kY0)}, {"south_east", centre(kX0 + kCols - 1, kY0 + kRows - 1)}}},
        {"zoom", kZoom},
        {"classifier", {{"kind", "METADATA_ORACLE"}}},
        {"detectors",
         {{"LARGE", {{"kind", "SCRIPTED_MOCK"}}}, {"SMALL", {{"kind", "SCRIPTED_MOCK"}, {"script", small_script}}}}},
        {"parallelism", 2},
    };
}

}  // namespace

int main(int argc, char** argv)
{
    if (argc != 2) {
        std::fprintf(stderr, "usage: make_cli_fixture <dir>\n");
        return 1;
    }
    const fs::path dir = fs::absolute(argv[1]);
    fs::remove_all(dir);
    for (std::uint32_t y = kY0; y < kY0 + kRows; ++y) {
        for (std::uint32_t x = kX0; x < kX0 + kCols; ++x) {
            const auto path = dir / "tiles" / std::to_string(kZoom) / std::to_string(x) / (std::to_string(y) + ".png");
            fs::create_directories(path.parent_path());
            write_png(path, testing::tile_raster(x, y));
        }
    }

    const json substation{{"detections",
                           {{{"label", "electrical substation"}, {"score", 0.9}, {"bbox", {100, 100, 400, 380}}},
                            {{"label", "storage tank"}, {"score", 0.6}, {"bbox", {900, 900, 960, 960}}}}}};
    write_json(dir / "config.json", config(dir, {{"*", substation}}));

    auto bad = config(dir, {{"*", substation}});
    bad["detectors"]["SMALL"]["retries"] = 3;
    write_json(dir / "bad_config.json", bad);

    const json fail{{"fail", true}, {"message", "scripted outage"}};
    write_json(dir / "failing_config.json", config(dir, {{"*", fail}}));

    // Mosaic is 2304 x 2048: four windows at stride 2000, one of them failing.
    const auto origin = geo::TileCoord(geo::ZoomLevel(kZoom), kX0, kY0);
    write_json(dir / "partial_config.json",
               config(dir, {{"*", substation}, {ingest::crop_id(origin, 304, 48), fail}}));

    dataset::SplitManifest manifest = dataset::make_manifest("CI-SS_test_stable", 3);
    eval::ImageDetections dets;
    for (int i = 0; i < 6; ++i) {
        const std::string ref = "img_" + std::to_string(i) + ".png";
        const double x = 100.0 * i;
        manifest.entries.push_back({ref,
                                    geo::ZoomLevel(19 + i % 3),
                                    {{"electrical substation", {x, 50, x + 80, 130}}, {"ship", {x, 400, x + 30, 420}}},
                                    dataset::Source::GoogleMaps});
        if (i % 2 == 0) {
            dets[ref].push_back({"electrical substation", 0.5 + 0.05 * i, {x + 2, 52, x + 82, 131}});
        }
        dets[ref].push_back({"electrical substation", 0.2, {1500, 1500, 1600, 1600}});
    }
    dataset::save_manifest(dir / "manifest.json", manifest);
    write_json(dir / "detections.json", eval::detections_to_json(dets));

    auto train = manifest;
    train.name = "CI-SS_train_beta";
    train.step = 2;
    dataset::save_manifest(dir / "train_beta.json", train);
    const std::vector<dataset::AnnotatedImage> dota{
        {"P0001.png", std::nullopt, {{"ship", {1, 1, 20, 20}}, {"plane", {30, 30, 90, 80}}}, dataset::Source::Dota},
        {"P0002.png", std::nullopt, {{"container-crane", {5, 5, 50, 50}}}, dataset::Source::Dota},
    };
    dataset::save_annotations(dir / "dota.json", dataset::AnnotationFormat::CocoJson, dota);

    Raster image(500, 400);
    image.fill(90, 120, 60);
    write_png(dir / "image.png", image);
    return 0;
}
