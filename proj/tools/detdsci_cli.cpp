#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "detdsci/annotations.hpp"
#include "detdsci/augment.hpp"
#include "detdsci/dataset.hpp"
#include "detdsci/detect.hpp"
#include "detdsci/eval.hpp"
#include "detdsci/image_codec.hpp"
#include "detdsci/ingest.hpp"
#include "detdsci/pipeline.hpp"
#include "detdsci/report.hpp"
#include "detdsci/router.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace detdsci;
using pipeline::kExitOk;
using pipeline::kExitPartialFailure;
using pipeline::kExitTotalFailure;
using pipeline::kExitValidation;

namespace {

struct GlobalOptions {
    std::string config;
    std::string cache_dir;
    std::optional<std::size_t> parallelism;
    std::optional<int> stride;
    std::optional<double> score_threshold;
    std::optional<double> nms_iou;
    std::string force_interval;
    bool verbose = false;
};

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open {}", path.string()));
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!text.empty() && text.back() != '\n') {
        out << '\n';
    }
    if (!out) {
        throw Error(fmt::format("cannot write {}", path.string()));
    }
}

/// Writes to `path`, or to stdout when it is empty.
void emit(const std::string& path, const std::string& text)
{
    if (path.empty()) {
        std::cout << text << (text.ends_with('\n') ? "" : "\n");
    } else {
        write_text(path, text);
    }
}

geo::ScaleInterval interval_arg(const std::string& text)
{
    try {
        return geo::parse_scale_interval(text);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

/// Loads --config and applies the global overrides.
pipeline::PipelineConfig load_config(const GlobalOptions& g)
{
    if (g.config.empty()) {
        throw ConfigError("this command needs --config");
    }
    auto config = pipeline::load_config(g.config);
    if (!g.cache_dir.empty()) {
        config.cache_dir = g.cache_dir;
    }
    if (g.parallelism) {
        config.parallelism = *g.parallelism;
    }
    if (g.stride) {
        config.stride = *g.stride;
    }
    if (g.score_threshold) {
        config.score_threshold = *g.score_threshold;
    }
    if (g.nms_iou) {
        config.nms_iou = *g.nms_iou;
    }
    if (!g.force_interval.empty()) {
        config.force_interval = interval_arg(g.force_interval);
    }
    config.validate();
    return config;
}

/// An image as a detector input: resized to the crop size when needed.
struct InputImage {
    std::string id;
    ingest::Crop crop;
    double scale_x = 1.0;
    double scale_y = 1.0;
};

InputImage load_input(const fs::path& path, std::optional<int> zoom)
{
    Raster raw = read_image(path);
    const double sx = static_cast<double>(raw.width()) / ingest::kCropSize;
    const double sy = static_cast<double>(raw.height()) / ingest::kCropSize;
    auto pixels = std::make_shared<const Raster>(
        raw.width() == ingest::kCropSize && raw.height() == ingest::kCropSize ? std::move(raw)
                                                                                : ingest::resize_to_crop(raw));
    const geo::ZoomLevel z(zoom.value_or(0));
    const std::string id = path.stem().string();
    return {id, {id, z, geo::TileCoord(z, 0, 0), 0, 0, ingest::kCropSize, ingest::kCropSize, pixels}, sx, sy};
}

// ---- fetch / slice ----

int cmd_fetch(const GlobalOptions& g, const std::string& mosaic_out)
{
    const auto config = load_config(g);
    if (!config.cache_dir && mosaic_out.empty()) {
        throw ConfigError("fetch needs --cache-dir (or cache_dir in the config) or --mosaic");
    }
    const auto tiles = ingest::plan_tiles(config.region);
    DefaultHttpTransport transport;
    std::optional<ingest::TileCache> cache;
    if (config.cache_dir) {
        cache.emplace(*config.cache_dir);
    }
    ingest::TileFetcher fetcher(config.tile_source, cache, transport);
    if (mosaic_out.empty()) {
        fetcher.prefetch(tiles, config.parallelism);
    } else {
        const auto mosaic = ingest::assemble_mosaic(fetcher.fetch_all(tiles, config.parallelism));
        write_png(mosaic_out, mosaic.pixels);
    }
    const auto stats = fetcher.stats();
    std::cout << json{{"tiles", tiles.size()},
                      {"network_requests", stats.network_requests},
                      {"cache_hits", stats.cache_hits},
                      {"retries", stats.retries}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

int cmd_slice(const GlobalOptions& g, const std::string& out_dir, bool plan_only)
{
    const auto config = load_config(g);
    const auto tiles = ingest::plan_tiles(config.region);
    if (tiles.empty()) {
        throw ConfigError("region covers no tiles");
    }
    const int width = static_cast<int>(tiles.back().x - tiles.front().x + 1) * geo::kTileSize;
    const int height = static_cast<int>(tiles.back().y - tiles.front().y + 1) * geo::kTileSize;
    const auto windows = ingest::plan_windows(width, height, config.stride);

    json index = json::array();
    for (const auto& w : windows) {
        index.push_back({{"crop_id", ingest::crop_id(tiles.front(), w.x, w.y)},
                         {"offset", {w.x, w.y}},
                         {"valid", {w.valid_width, w.valid_height}}});
    }
    if (plan_only || out_dir.empty()) {
        std::cout << json{{"mosaic", {width, height}}, {"stride", config.stride}, {"crops", index}}.dump(2) << "\n";
        return kExitOk;
    }

    DefaultHttpTransport transport;
    std::optional<ingest::TileCache> cache;
    if (config.cache_dir) {
        cache.emplace(*config.cache_dir);
    }
    ingest::TileFetcher fetcher(config.tile_source, cache, transport);
    std::map<geo::TileCoord, Raster> in_memory;
    ingest::TiledMosaicView::TileLoader loader;
    if (cache) {
        fetcher.prefetch(tiles, config.parallelism);
        loader = [&fetcher](const geo::TileCoord& t) { return fetcher.fetch_tile(t); };
    } else {
        in_memory = fetcher.fetch_all(tiles, config.parallelism);
        loader = [&in_memory](const geo::TileCoord& t) { return in_memory.at(t); };
    }
    const ingest::TiledMosaicView view(tiles, loader);
    fs::create_directories(out_dir);
    for (const auto& w : windows) {
        const auto crop = ingest::extract_crop(view, w);
        write_png(fs::path(out_dir) / (crop.id + ".png"), *crop.pixels);
    }
    write_text(fs::path(out_dir) / "crops.json", index.dump(2));
    spdlog::info("wrote {} crops to {}", windows.size(), out_dir);
    return kExitOk;
}

// ---- build-dataset ----

int cmd_filter_zooms(const std::string& in, const std::vector<int>& zooms, const std::string& name,
                     std::optional<int> step, const std::string& out)
{
    auto manifest = dataset::filter_zoom_combination(dataset::load_manifest(in), {zooms.begin(), zooms.end()});
    if (!name.empty()) {
        manifest.name = name;
    }
    if (step) {
        manifest.step = *step;
    }
    dataset::validate_manifest_name(manifest.name, manifest.step);
    dataset::save_manifest(out, manifest);
    std::cout << dataset::summarize_counts(manifest).render();
    return kExitOk;
}

dataset::ClassMap class_map_arg(const std::string& text)
{
    if (text == "dota") {
        return dataset::dota_class_map();
    }
    if (text == "dior") {
        return dataset::dior_class_map();
    }
    return dataset::load_class_map(text);
}

int cmd_merge_external(const std::string& in, const std::string& external, const std::string& format,
                       const std::string& source, const std::string& class_map, std::optional<int> step,
                       const std::string& out)
{
    auto images = dataset::load_annotations(external, dataset::parse_annotation_format(format));
    const auto src = dataset::parse_source(source);
    for (auto& image : images) {
        image.source = src;
        image.zoom.reset();
    }
    auto merged = dataset::merge_external(dataset::load_manifest(in), images, class_map_arg(class_map));
    if (step) {
        merged.step = *step;
        dataset::validate_manifest_name(merged.name, merged.step);
    }
    dataset::save_manifest(out, merged);
    std::cout << dataset::summarize_counts(merged).render();
    return kExitOk;
}

int cmd_ablate(const std::string& in, const std::string& label, const std::string& out)
{
    const auto ablated = dataset::ablate_class(dataset::load_manifest(in), label);
    dataset::save_manifest(out, ablated);
    std::cout << dataset::summarize_counts(ablated).render();
    return kExitOk;
}

int cmd_augment(const std::string& image, const std::string& technique, std::uint64_t seed, const std::string& out)
{
    const auto t = dataset::parse_da_technique(technique);
    const auto result = dataset::augment(dataset::FloatImage::from_raster(read_image(image)), t, seed);
    write_png(out, result.image.to_raster());
    json info{{"technique", dataset::to_string(t)},
              {"description", dataset::description(t)},
              {"seed", seed},
              {"size", {result.image.width, result.image.height}}};
    if (result.scale_factor) {
        info["scale_factor"] = *result.scale_factor;
    }
    std::cout << info.dump(2) << "\n";
    return kExitOk;
}

int cmd_summarize(const std::string& in, bool as_json)
{
    const auto manifest = dataset::load_manifest(in);
    const auto counts = dataset::summarize_counts(manifest);
    if (as_json) {
        json rows = json::object();
        for (const auto& label : counts.labels()) {
            json row = json::object();
            for (const auto& column : counts.columns()) {
                row[column.header()] = counts.at(label, column);
            }
            row["total"] = counts.row_total(label);
            rows[label] = std::move(row);
        }
        std::cout << json{{"name", manifest.name}, {"step", manifest.step}, {"classes", rows},
                          {"total", counts.total()}}
                         .dump(2)
                  << "\n";
        return kExitOk;
    }
    std::vector<std::string> order;
    try {
        const auto name = dataset::parse_manifest_name(manifest.name);
        order = dataset::catalog(name.scale, name.stage).labels();
    } catch (const ParseError&) {
    }
    std::cout << manifest.name << " (step " << manifest.step << ")\n" << counts.render(order);
    return kExitOk;
}

// ---- route / detect ----

router::ClassifierBackendRef classifier_for(const GlobalOptions& g, const std::string& endpoint)
{
    if (!endpoint.empty()) {
        return router::ClassifierBackendRef::remote(endpoint);
    }
    if (!g.config.empty()) {
        return pipeline::load_config(g.config).classifier;
    }
    return router::ClassifierBackendRef::oracle();
}

json decision_json(const router::RoutingDecision& d)
{
    return {{"interval", geo::to_string(d.interval)}, {"confidence", d.confidence}, {"detector_id", d.detector_id}};
}

int cmd_route(const GlobalOptions& g, const std::string& image, std::optional<int> zoom, const std::string& endpoint)
{
    const auto input = load_input(image, zoom);
    const auto classifier = classifier_for(g, endpoint);
    if (classifier.kind == router::ClassifierKind::MetadataOracle && !zoom) {
        throw ConfigError("metadata routing needs --zoom");
    }
    DefaultHttpTransport transport;
    const auto decision = !g.force_interval.empty()
                              ? router::RoutingDecision{interval_arg(g.force_interval), 1.0,
                                                        router::detector_id_for(interval_arg(g.force_interval))}
                              : router::classify_scale(input.crop, classifier, &transport);
    json out = decision_json(decision);
    out["image"] = input.id;
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_detect(const GlobalOptions& g, const std::string& image, std::optional<int> zoom, const std::string& out_path)
{
    const auto config = load_config(g);
    const auto input = load_input(image, zoom);
    DefaultHttpTransport transport;
    router::RoutingDecision decision;
    if (config.force_interval) {
        decision = {*config.force_interval, 1.0, router::detector_id_for(*config.force_interval)};
    } else {
        if (config.classifier.kind == router::ClassifierKind::MetadataOracle && !zoom) {
            throw ConfigError("metadata routing needs --zoom (or use --force-interval)");
        }
        decision = router::classify_scale(input.crop, config.classifier, &transport);
    }
    const auto& backend = config.detectors.at(decision.interval);
    auto dets = detect::detect(input.crop, backend, decision.detector_id, &transport);
    std::erase_if(dets, [&](const detect::Detection& d) { return d.score < config.score_threshold; });
    for (auto& d : dets) {
        // Back to the pixel frame of the input file.
        d.bbox = {d.bbox.x_min * input.scale_x, d.bbox.y_min * input.scale_y, d.bbox.x_max * input.scale_x,
                  d.bbox.y_max * input.scale_y};
    }
    const json out{{"routing", decision_json(decision)},
                   {"detections", eval::detections_to_json({{input.id, dets}})}};
    emit(out_path, out.dump(2));
    return kExitOk;
}

// ---- run ----

int cmd_run(const GlobalOptions& g, const std::string& geojson, const std::string& record)
{
    auto config = load_config(g);
    if (!geojson.empty()) {
        config.output.geojson = geojson;
    }
    if (!record.empty()) {
        config.output.run_record = record;
    }
    DefaultHttpTransport transport;
    const auto result = pipeline::run(config, transport);
    pipeline::write_outputs(config, result);
    if (!config.output.geojson) {
        std::cout << result.geojson.dump(2) << "\n";
    }
    const auto& r = result.record;
    spdlog::info("{} tiles, {} crops, {} failed, {} detections, exit {}", r.tiles, r.crops.size(), r.failed_crops(),
                 r.detections.size(), r.exit_code);
    if (!r.fatal_error.empty()) {
        spdlog::error("{}", r.fatal_error);
    }
    return r.exit_code;
}

// ---- eval ----

std::vector<dataset::AnnotatedImage> load_ground_truth(const std::string& gt, const std::string& format)
{
    if (format.empty()) {
        return dataset::load_manifest(gt).entries;
    }
    return dataset::load_annotations(gt, dataset::parse_annotation_format(format));
}

int cmd_eval(const GlobalOptions& g, const std::string& gt, const std::string& gt_format,
             const std::string& detections, const std::string& comparison, const std::vector<std::string>& classes,
             const std::string& out, const std::string& curves)
{
    const auto ground_truth = load_ground_truth(gt, gt_format);

    if (!comparison.empty()) {
        auto spec = pipeline::comparison_from_json(read_json(comparison));
        if (g.score_threshold) {
            spec.score_threshold = *g.score_threshold;
        }
        if (g.parallelism) {
            spec.parallelism = *g.parallelism;
        }
        if (!classes.empty()) {
            spec.targets = {classes.begin(), classes.end()};
        }
        const fs::path root = spec.image_root.value_or(fs::path(comparison).parent_path());
        const pipeline::ImageLoader loader = [&root](const dataset::AnnotatedImage& image) {
            return read_image(root / image.image_ref);
        };
        DefaultHttpTransport transport;
        std::vector<pipeline::ArmOutput> outputs;
        for (const auto& arm : spec.arms) {
            outputs.push_back(pipeline::run_arm(arm, ground_truth, spec, &transport, loader));
        }
        const auto report = pipeline::evaluate_arms(ground_truth, outputs, spec);
        if (!out.empty()) {
            write_text(out, pipeline::to_json(report).dump(2));
        }
        std::cout << report::comparison_table_markdown(report);
        const bool complete = std::all_of(report.arms.begin(), report.arms.end(),
                                          [](const pipeline::ArmResult& a) { return a.complete; });
        return complete ? kExitOk : kExitPartialFailure;
    }

    if (detections.empty()) {
        throw ConfigError("eval needs --detections or --comparison");
    }
    eval::EvalOptions options;
    options.score_threshold = g.score_threshold.value_or(0.0);
    if (!classes.empty()) {
        options.classes = std::set<std::string>(classes.begin(), classes.end());
    }
    const auto report = eval::evaluate(ground_truth, eval::detections_from_json(read_json(detections)), options);
    if (!out.empty()) {
        write_text(out, eval::to_json(report).dump(2));
    }
    if (!curves.empty()) {
        write_text(curves, eval::curves_csv(report));
    }
    std::cout << eval::render_table(report);
    return kExitOk;
}

// ---- report ----

int cmd_report(const std::vector<std::string>& runs, const std::vector<std::string>& links,
               const std::vector<std::string>& evals, const std::string& comparison, const std::string& out_md,
               const std::string& out_json)
{
    if (!links.empty() && links.size() != runs.size()) {
        throw ConfigError("--geojson must be given once per --run");
    }
    report::ReportInputs inputs;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        inputs.runs.push_back({pipeline::run_record_from_json(read_json(runs[i])), links.empty() ? "" : links[i]});
    }
    for (const auto& spec : evals) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError(fmt::format("--eval expects NAME=PATH, got '{}'", spec));
        }
        inputs.evals.emplace_back(spec.substr(0, eq), eval::report_from_json(read_json(spec.substr(eq + 1))));
    }
    if (!comparison.empty()) {
        inputs.comparison = pipeline::comparison_report_from_json(read_json(comparison));
    }
    if (inputs.empty()) {
        throw ConfigError("nothing to report: give --run, --eval or --comparison");
    }
    const auto bundle = report::make_report(inputs);
    emit(out_md, bundle.markdown);
    if (!out_json.empty()) {
        write_text(out_json, bundle.json.dump(2));
    }
    return kExitOk;
}

/// Maps library errors onto the documented exit codes.
int guarded(const std::function<int()>& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        spdlog::error("invalid configuration: {}", e.what());
        return kExitValidation;
    } catch (const ParseError& e) {
        spdlog::error("invalid input: {}", e.what());
        return kExitValidation;
    } catch (const dataset::UnknownClassError& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        spdlog::error("invalid argument: {}", e.what());
        return kExitValidation;
    } catch (const std::domain_error& e) {
        spdlog::error("invalid argument: {}", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitTotalFailure;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Resolution-aware object detection over web-map tiles"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config, "Pipeline config JSON");
    app.add_option("--cache-dir", g.cache_dir, "Tile cache directory");
    app.add_option("--parallelism", g.parallelism, "Worker budget")->check(CLI::PositiveNumber);
    app.add_option("--stride", g.stride, "Sliding-window stride in pixels")->check(CLI::Range(1, ingest::kCropSize));
    app.add_option("--score-threshold", g.score_threshold, "Minimum detection score")->check(CLI::Range(0.0, 1.0));
    app.add_option("--nms-iou", g.nms_iou, "NMS IoU threshold");
    app.add_option("--force-interval", g.force_interval, "Bypass the classifier")
        ->check(CLI::IsMember({"LARGE", "SMALL"}));
    app.add_flag("-v,--verbose", g.verbose, "Debug logging");

    std::function<int()> action;

    auto* fetch = app.add_subcommand("fetch", "Download the tiles of the configured region");
    std::string mosaic_out;
    fetch->add_option("--mosaic", mosaic_out, "Also write the assembled mosaic PNG");
    fetch->callback([&] { action = [&] { return cmd_fetch(g, mosaic_out); }; });

    auto* slice = app.add_subcommand("slice", "Cut the region mosaic into detector crops");
    std::string slice_out;
    bool plan_only = false;
    slice->add_option("--out-dir", slice_out, "Directory for crop PNGs and crops.json");
    slice->add_flag("--plan-only", plan_only, "Only list the windows");
    slice->callback([&] { action = [&] { return cmd_slice(g, slice_out, plan_only); }; });

    auto* build = app.add_subcommand("build-dataset", "Manifest operations of the dataset workflow");
    build->require_subcommand(1);

    std::string ds_in;
    std::string ds_out;
    auto* filter = build->add_subcommand("filter-zooms", "Keep one zoom combination (step 1)");
    std::vector<int> zooms;
    std::string new_name;
    std::optional<int> step;
    filter->add_option("--in", ds_in, "Manifest JSON")->required();
    filter->add_option("--zooms", zooms, "Zoom levels, comma separated")->required()->delimiter(',');
    filter->add_option("--name", new_name, "Name of the output manifest");
    filter->add_option("--step", step, "Construction step of the output")->check(CLI::Range(1, 3));
    filter->add_option("--out", ds_out, "Output manifest JSON")->required();
    filter->callback([&] { action = [&] { return cmd_filter_zooms(ds_in, zooms, new_name, step, ds_out); }; });

    auto* merge = build->add_subcommand("merge-external", "Append a remapped external dataset (step 2)");
    std::string external;
    std::string format = "coco";
    std::string source;
    std::string class_map;
    merge->add_option("--in", ds_in, "Manifest JSON")->required();
    merge->add_option("--external", external, "External annotations")->required();
    merge->add_option("--format", format, "voc or coco")->check(CLI::IsMember({"voc", "coco"}));
    merge->add_option("--source", source, "DOTA or DIOR")->required()->check(CLI::IsMember({"DOTA", "DIOR"}));
    merge->add_option("--class-map", class_map, "dota, dior or a class-map JSON file")->required();
    merge->add_option("--step", step, "Construction step of the output")->check(CLI::Range(1, 3));
    merge->add_option("--out", ds_out, "Output manifest JSON")->required();
    merge->callback([&] {
        action = [&] { return cmd_merge_external(ds_in, external, format, source, class_map, step, ds_out); };
    });

    auto* ablate = build->add_subcommand("ablate", "Remove every instance of one class");
    std::string label;
    ablate->add_option("--in", ds_in, "Manifest JSON")->required();
    ablate->add_option("--label", label, "Class to remove")->required();
    ablate->add_option("--out", ds_out, "Output manifest JSON")->required();
    ablate->callback([&] { action = [&] { return cmd_ablate(ds_in, label, ds_out); }; });

    auto* augment = build->add_subcommand("augment", "Apply one augmentation technique to an image");
    std::string aug_image;
    std::string technique;
    std::uint64_t seed = 0;
    augment->add_option("--image", aug_image, "Input image")->required()->check(CLI::ExistingFile);
    augment->add_option("--technique", technique, "DA1..DA8")->required();
    augment->add_option("--seed", seed, "Random seed");
    augment->add_option("--out", ds_out, "Output PNG")->required();
    augment->callback([&] { action = [&] { return cmd_augment(aug_image, technique, seed, ds_out); }; });

    auto* summarize = build->add_subcommand("summarize", "Class x zoom instance counts");
    bool as_json = false;
    summarize->add_option("--in", ds_in, "Manifest JSON")->required();
    summarize->add_flag("--json", as_json, "Machine-readable output");
    summarize->callback([&] { action = [&] { return cmd_summarize(ds_in, as_json); }; });

    std::string image;
    std::optional<int> zoom;
    std::string endpoint;
    std::string out;

    auto* route = app.add_subcommand("route", "Classify the zoom interval of one image");
    route->add_option("--image", image, "Image file")->required()->check(CLI::ExistingFile);
    route->add_option("--zoom", zoom, "Known zoom level (metadata routing)")->check(CLI::Range(14, 23));
    route->add_option("--endpoint", endpoint, "Remote classifier base URL");
    route->callback([&] { action = [&] { return cmd_route(g, image, zoom, endpoint); }; });

    auto* detect_cmd = app.add_subcommand("detect", "Route and detect on one image");
    detect_cmd->add_option("--image", image, "Image file")->required()->check(CLI::ExistingFile);
    detect_cmd->add_option("--zoom", zoom, "Known zoom level (metadata routing)")->check(CLI::Range(14, 23));
    detect_cmd->add_option("--out", out, "Output JSON (default stdout)");
    detect_cmd->callback([&] { action = [&] { return cmd_detect(g, image, zoom, out); }; });

    auto* run = app.add_subcommand("run", "Full pipeline over the configured region");
    std::string geojson;
    std::string record;
    run->add_option("--geojson", geojson, "GeoJSON output path");
    run->add_option("--record", record, "Run record output path");
    run->callback([&] { action = [&] { return cmd_run(g, geojson, record); }; });

    auto* eval_cmd = app.add_subcommand("eval", "Score detections against ground truth");
    std::string gt;
    std::string gt_format;
    std::string detections;
    std::string comparison;
    std::vector<std::string> classes;
    std::string curves;
    eval_cmd->add_option("--gt", gt, "Ground-truth manifest JSON (or annotations with --gt-format)")->required();
    eval_cmd->add_option("--gt-format", gt_format, "voc or coco")->check(CLI::IsMember({"voc", "coco"}));
    eval_cmd->add_option("--detections", detections, "Detections JSON keyed by image id");
    eval_cmd->add_option("--comparison", comparison, "Comparison spec JSON: run and score every arm");
    eval_cmd->add_option("--classes", classes, "Classes to report")->delimiter(',');
    eval_cmd->add_option("--out", out, "Report JSON");
    eval_cmd->add_option("--curves", curves, "Precision/recall curves CSV");
    eval_cmd->callback([&] {
        action = [&] { return cmd_eval(g, gt, gt_format, detections, comparison, classes, out, curves); };
    });

    auto* report_cmd = app.add_subcommand("report", "Markdown and JSON report from saved outputs");
    std::vector<std::string> runs;
    std::vector<std::string> links;
    std::vector<std::string> evals;
    std::string out_json;
    report_cmd->add_option("--run", runs, "Run record JSON (repeatable)");
    report_cmd->add_option("--geojson", links, "GeoJSON link per --run");
    report_cmd->add_option("--eval", evals, "NAME=eval report JSON (repeatable)");
    report_cmd->add_option("--comparison", comparison, "Comparison report JSON");
    report_cmd->add_option("--out", out, "Markdown output (default stdout)");
    report_cmd->add_option("--json", out_json, "JSON bundle output");
    report_cmd->callback([&] {
        action = [&] { return cmd_report(runs, links, evals, comparison, out, out_json); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }
    spdlog::set_default_logger(spdlog::stderr_color_mt("detdsci"));
    spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);
    return guarded(action);
}
