#include "detdsci/pipeline.hpp"

#include <chrono>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "detdsci/encoding.hpp"
#include "detdsci/image_codec.hpp"
#include "detdsci/worker_pool.hpp"
#include "fmt_path.hpp"
#include "json_util.hpp"

namespace detdsci::pipeline {

using nlohmann::json;
using detail::check_keys;
using detail::optional;
using detail::required;

namespace {

json point_json(const geo::GeoPoint& p)
{
    return {{"lat", p.latitude}, {"lon", p.longitude}};
}

geo::GeoPoint point_from(const json& doc, std::string_view where)
{
    check_keys(doc, {"lat", "lon"}, where);
    return {required<double>(doc, "lat", where), required<double>(doc, "lon", where)};
}

geo::ScaleInterval interval_from(const std::string& text, std::string_view where)
{
    try {
        return geo::parse_scale_interval(text);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
}

json detection_json(const detect::Detection& d)
{
    return {{"label", d.label},
            {"score", d.score},
            {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}}};
}

detect::Detection detection_from(const json& doc, std::string_view where)
{
    check_keys(doc, {"label", "score", "bbox"}, where);
    const auto b = required<std::vector<double>>(doc, "bbox", where);
    if (b.size() != 4) {
        throw ConfigError(fmt::format("{}: bbox must be [x1, y1, x2, y2]", where));
    }
    return {required<std::string>(doc, "label", where), required<double>(doc, "score", where),
            {b[0], b[1], b[2], b[3]}};
}

json detectors_json(const std::map<geo::ScaleInterval, detect::DetectorBackendRef>& detectors)
{
    json out = json::object();
    for (const auto& [interval, backend] : detectors) {
        out[std::string(geo::to_string(interval))] = to_json(backend);
    }
    return out;
}

std::map<geo::ScaleInterval, detect::DetectorBackendRef> detectors_from(const json& doc,
                                                                       std::string_view where)
{
    check_keys(doc, {"LARGE", "SMALL"}, where);
    std::map<geo::ScaleInterval, detect::DetectorBackendRef> out;
    for (const auto& [key, value] : doc.items()) {
        out.emplace(interval_from(key, where), detector_from_json(value));
    }
    return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

// ---- backends ----

json to_json(const detect::DetectorBackendRef& backend)
{
    json out{{"kind", detect::to_string(backend.kind)}};
    if (!backend.endpoint.empty()) {
        out["endpoint"] = backend.endpoint;
    }
    if (!backend.script.empty()) {
        json script = json::object();
        for (const auto& [image_id, entry] : backend.script) {
            json dets = json::array();
            for (const auto& d : entry.detections) {
                dets.push_back(detection_json(d));
            }
            json e{{"detections", std::move(dets)}};
            if (entry.fail) {
                e["fail"] = true;
                e["message"] = entry.message;
            }
            script[image_id] = std::move(e);
        }
        out["script"] = std::move(script);
    }
    if (backend.config_tag) {
        out["config_tag"] = *backend.config_tag;
    }
    return out;
}

detect::DetectorBackendRef detector_from_json(const json& doc)
{
    constexpr std::string_view where = "detector";
    check_keys(doc, {"kind", "endpoint", "script", "config_tag"}, where);
    detect::DetectorBackendRef backend;
    backend.kind = detect::parse_detector_kind(required<std::string>(doc, "kind", where));
    backend.endpoint = optional<std::string>(doc, "endpoint", "", where);
    if (const auto it = doc.find("script"); it != doc.end()) {
        if (!it->is_object()) {
            throw ConfigError("detector.script: expected an object keyed by image id");
        }
        for (const auto& [image_id, node] : it->items()) {
            const std::string entry_where = fmt::format("detector.script[{}]", image_id);
            check_keys(node, {"detections", "fail", "message"}, entry_where);
            detect::ScriptEntry entry;
            if (const auto dets = node.find("detections"); dets != node.end()) {
                for (const auto& d : *dets) {
                    entry.detections.push_back(detection_from(d, entry_where));
                }
            }
            entry.fail = optional<bool>(node, "fail", false, entry_where);
            entry.message = optional<std::string>(node, "message", "", entry_where);
            backend.script.emplace(image_id, std::move(entry));
        }
    }
    if (const auto it = doc.find("config_tag"); it != doc.end() && !it->is_null()) {
        backend.config_tag = required<std::string>(doc, "config_tag", where);
    }
    backend.validate();
    return backend;
}

json to_json(const router::ClassifierBackendRef& backend)
{
    json out{{"kind", router::to_string(backend.kind)}};
    if (!backend.endpoint.empty()) {
        out["endpoint"] = backend.endpoint;
    }
    if (backend.stub_answer) {
        out["stub_answer"] = geo::to_string(*backend.stub_answer);
    }
    return out;
}

router::ClassifierBackendRef classifier_from_json(const json& doc)
{
    constexpr std::string_view where = "classifier";
    check_keys(doc, {"kind", "endpoint", "stub_answer"}, where);
    router::ClassifierBackendRef backend;
    backend.kind = router::parse_classifier_kind(required<std::string>(doc, "kind", where));
    backend.endpoint = optional<std::string>(doc, "endpoint", "", where);
    if (const auto it = doc.find("stub_answer"); it != doc.end() && !it->is_null()) {
        backend.stub_answer = interval_from(required<std::string>(doc, "stub_answer", where), where);
    }
    backend.validate();
    return backend;
}

// ---- config ----

void PipelineConfig::validate() const
{
    tile_source.validate();
    ingest::validate_region(region);
    if (stride < 1 || stride > ingest::kCropSize) {
        throw ConfigError(fmt::format("stride {} outside [1, {}]", stride, ingest::kCropSize));
    }
    classifier.validate();
    for (const auto interval : {geo::ScaleInterval::Large, geo::ScaleInterval::Small}) {
        const auto it = detectors.find(interval);
        if (it == detectors.end()) {
            throw ConfigError(fmt::format("no detector backend for interval {}", geo::to_string(interval)));
        }
        it->second.validate();
    }
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
        throw ConfigError(fmt::format("score_threshold {} outside [0, 1]", score_threshold));
    }
    if (!(nms_iou > 0.0 && nms_iou < 1.0)) {
        throw ConfigError(fmt::format("nms_iou {} outside (0, 1)", nms_iou));
    }
    if (parallelism < 1) {
        throw ConfigError("parallelism must be at least 1");
    }
    if (!(failure_tolerance >= 0.0 && failure_tolerance <= 1.0)) {
        throw ConfigError(fmt::format("failure_tolerance {} outside [0, 1]", failure_tolerance));
    }
    if (targets && targets->empty()) {
        throw ConfigError("targets must not be empty");
    }
}

std::set<std::string> PipelineConfig::target_labels() const
{
    if (targets) {
        return *targets;
    }
    std::set<std::string> out;
    for (const auto scale : {geo::ScaleInterval::Large, geo::ScaleInterval::Small}) {
        for (const auto& label : dataset::catalog(scale).detection_classes) {
            out.insert(label);
        }
    }
    return out;
}

PipelineConfig config_from_json(const json& doc)
{
    constexpr std::string_view where = "config";
    check_keys(doc,
               {"tile_source", "region", "zoom", "stride", "classifier", "detectors", "score_threshold",
                "nms_iou", "parallelism", "cache_dir", "force_interval", "targets",
                "failure_tolerance", "output"},
               where);
    PipelineConfig config;

    const auto& ts = required<json>(doc, "tile_source", where);
    check_keys(ts, {"url_template", "api_key_ref", "rate_limit", "retry"}, "config.tile_source");
    config.tile_source.url_template = required<std::string>(ts, "url_template", "config.tile_source");
    config.tile_source.api_key_ref = optional<std::string>(ts, "api_key_ref", "", "config.tile_source");
    config.tile_source.rate_limit = optional<double>(ts, "rate_limit", 8.0, "config.tile_source");
    if (const auto it = ts.find("retry"); it != ts.end()) {
        check_keys(*it, {"max_attempts", "backoff_ms"}, "config.tile_source.retry");
        config.tile_source.retry.max_attempts =
            optional<int>(*it, "max_attempts", 3, "config.tile_source.retry");
        config.tile_source.retry.backoff_base =
            std::chrono::milliseconds(optional<std::int64_t>(*it, "backoff_ms", 250, "config.tile_source.retry"));
    }

    const auto& region = required<json>(doc, "region", where);
    check_keys(region, {"north_west", "south_east"}, "config.region");
    const int zoom = required<int>(doc, "zoom", where);
    try {
        config.region = {point_from(required<json>(region, "north_west", "config.region"), "config.region.north_west"),
                         point_from(required<json>(region, "south_east", "config.region"), "config.region.south_east"),
                         geo::ZoomLevel(zoom)};
    } catch (const std::domain_error& e) {
        throw ConfigError(fmt::format("config.zoom: {}", e.what()));
    }

    config.stride = optional<int>(doc, "stride", ingest::kCropSize, where);
    config.classifier = classifier_from_json(required<json>(doc, "classifier", where));
    config.detectors = detectors_from(required<json>(doc, "detectors", where), "config.detectors");
    config.score_threshold = optional<double>(doc, "score_threshold", 0.0, where);
    config.nms_iou = optional<double>(doc, "nms_iou", detect::kDefaultNmsIou, where);
    const auto parallelism = optional<std::int64_t>(doc, "parallelism", 4, where);
    if (parallelism < 1) {
        throw ConfigError("config.parallelism must be at least 1");
    }
    config.parallelism = static_cast<std::size_t>(parallelism);
    if (const auto dir = optional<std::string>(doc, "cache_dir", "", where); !dir.empty()) {
        config.cache_dir = dir;
    }
    if (const auto fi = optional<std::string>(doc, "force_interval", "", where); !fi.empty()) {
        config.force_interval = interval_from(fi, "config.force_interval");
    }
    if (const auto it = doc.find("targets"); it != doc.end() && !it->is_null()) {
        const auto list = required<std::vector<std::string>>(doc, "targets", where);
        config.targets = std::set<std::string>(list.begin(), list.end());
    }
    config.failure_tolerance = optional<double>(doc, "failure_tolerance", 0.0, where);
    if (const auto it = doc.find("output"); it != doc.end()) {
        check_keys(*it, {"geojson", "run_record"}, "config.output");
        if (const auto p = optional<std::string>(*it, "geojson", "", "config.output"); !p.empty()) {
            config.output.geojson = p;
        }
        if (const auto p = optional<std::string>(*it, "run_record", "", "config.output"); !p.empty()) {
            config.output.run_record = p;
        }
    }
    config.validate();
    return config;
}

json to_json(const PipelineConfig& config)
{
    const auto& ts = config.tile_source;
    json out{
        {"tile_source",
         {{"url_template", ts.url_template},
          {"api_key_ref", ts.api_key_ref},
          {"rate_limit", ts.rate_limit},
          {"retry", {{"max_attempts", ts.retry.max_attempts}, {"backoff_ms", ts.retry.backoff_base.count()}}}}},
        {"region",
         {{"north_west", point_json(config.region.north_west)},
          {"south_east", point_json(config.region.south_east)}}},
        {"zoom", config.region.zoom.value()},
        {"stride", config.stride},
        {"classifier", to_json(config.classifier)},
        {"detectors", detectors_json(config.detectors)},
        {"score_threshold", config.score_threshold},
        {"nms_iou", config.nms_iou},
        {"parallelism", config.parallelism},
        {"failure_tolerance", config.failure_tolerance},
    };
    if (config.cache_dir) {
        out["cache_dir"] = config.cache_dir->string();
    }
    if (config.force_interval) {
        out["force_interval"] = geo::to_string(*config.force_interval);
    }
    if (config.targets) {
        out["targets"] = *config.targets;
    }
    json output = json::object();
    if (config.output.geojson) {
        output["geojson"] = config.output.geojson->string();
    }
    if (config.output.run_record) {
        output["run_record"] = config.output.run_record->string();
    }
    out["output"] = std::move(output);
    return out;
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config {}", path));
    }
    try {
        return config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
}

std::string config_hash(const PipelineConfig& config)
{
    // The parallelism budget and output paths do not change results.
    json canonical = to_json(config);
    canonical.erase("parallelism");
    canonical.erase("output");
    return sha256_hex(canonical.dump());
}

// ---- run record ----

std::string_view to_string(CropStatus status) noexcept
{
    switch (status) {
    case CropStatus::RoutingFailed:
        return "ROUTING_FAILED";
    case CropStatus::DetectionFailed:
        return "DETECTION_FAILED";
    case CropStatus::Ok:
        break;
    }
    return "OK";
}

std::size_t RunRecord::failed_crops() const
{
    return static_cast<std::size_t>(std::count_if(
        crops.begin(), crops.end(), [](const CropRecord& c) { return c.status != CropStatus::Ok; }));
}

json to_json(const RunRecord& record, bool include_timings)
{
    json crops = json::array();
    for (const auto& c : record.crops) {
        json node{{"crop_id", c.crop_id},
                  {"offset", {c.offset_x, c.offset_y}},
                  {"status", to_string(c.status)},
                  {"detections", c.detections}};
        if (c.routing) {
            node["routing"] = {{"interval", geo::to_string(c.routing->interval)},
                               {"confidence", c.routing->confidence},
                               {"detector_id", c.routing->detector_id}};
        }
        if (!c.error.empty()) {
            node["error"] = c.error;
        }
        crops.push_back(std::move(node));
    }
    json dets = json::array();
    for (const auto& d : record.detections) {
        dets.push_back(detect::to_json(d));
    }
    json out{{"config_hash", record.config_hash},
             {"tiles", record.tiles},
             {"crops", std::move(crops)},
             {"detections", std::move(dets)},
             {"targets", record.targets},
             {"exit_code", record.exit_code}};
    if (!record.fatal_error.empty()) {
        out["fatal_error"] = record.fatal_error;
    }
    if (include_timings) {
        out["timings"] = {{"fetch_ms", record.timings.fetch_ms},
                          {"crops_ms", record.timings.crops_ms},
                          {"merge_ms", record.timings.merge_ms},
                          {"total_ms", record.timings.total_ms}};
    }
    return out;
}

RunRecord run_record_from_json(const json& doc)
{
    try {
        RunRecord record;
        record.config_hash = doc.at("config_hash").get<std::string>();
        record.tiles = doc.at("tiles").get<std::size_t>();
        for (const auto& node : doc.at("crops")) {
            CropRecord c;
            c.crop_id = node.at("crop_id").get<std::string>();
            c.offset_x = node.at("offset").at(0).get<int>();
            c.offset_y = node.at("offset").at(1).get<int>();
            const auto status = node.at("status").get<std::string>();
            c.status = status == "OK"               ? CropStatus::Ok
                       : status == "ROUTING_FAILED" ? CropStatus::RoutingFailed
                                                    : CropStatus::DetectionFailed;
            c.detections = node.at("detections").get<std::size_t>();
            if (const auto r = node.find("routing"); r != node.end()) {
                c.routing = router::RoutingDecision{
                    geo::parse_scale_interval(r->at("interval").get<std::string>()),
                    r->at("confidence").get<double>(), r->at("detector_id").get<std::string>()};
            }
            c.error = node.value("error", "");
            record.crops.push_back(std::move(c));
        }
        for (const auto& d : doc.at("detections")) {
            record.detections.push_back(detect::global_detection_from_json(d));
        }
        record.targets = doc.at("targets").get<std::vector<std::string>>();
        record.exit_code = doc.at("exit_code").get<int>();
        record.fatal_error = doc.value("fatal_error", "");
        if (const auto t = doc.find("timings"); t != doc.end()) {
            record.timings = {t->at("fetch_ms").get<double>(), t->at("crops_ms").get<double>(),
                              t->at("merge_ms").get<double>(), t->at("total_ms").get<double>()};
        }
        return record;
    } catch (const std::exception& e) {
        throw ParseError(fmt::format("malformed run record: {}", e.what()));
    }
}

int exit_code_for(std::size_t crops, std::size_t failed, double tolerance)
{
    if (failed == 0) {
        return kExitOk;
    }
    if (failed >= crops) {
        return kExitTotalFailure;
    }
    const double fraction = static_cast<double>(failed) / static_cast<double>(crops);
    return fraction > tolerance ? kExitPartialFailure : kExitOk;
}

// ---- run ----

RunResult run(const PipelineConfig& config, HttpTransport& transport)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();

    RunResult result;
    RunRecord& record = result.record;
    record.config_hash = config_hash(config);
    const auto targets = config.target_labels();
    record.targets.assign(targets.begin(), targets.end());

    const auto tiles = ingest::plan_tiles(config.region);
    record.tiles = tiles.size();

    std::optional<ingest::TileCache> cache;
    if (config.cache_dir) {
        cache.emplace(*config.cache_dir);
    }
    ingest::TileFetcher fetcher(config.tile_source, cache, transport);
    std::map<geo::TileCoord, Raster> in_memory;
    try {
        if (cache) {
            fetcher.prefetch(tiles, config.parallelism);
        } else {
            in_memory = fetcher.fetch_all(tiles, config.parallelism);
        }
    } catch (const Error& e) {
        spdlog::error("tile acquisition failed: {}", e.what());
        record.fatal_error = e.what();
        record.exit_code = kExitTotalFailure;
        result.geojson = detect::to_geojson({});
        record.timings.total_ms = elapsed_ms(start);
        return result;
    }
    record.timings.fetch_ms = elapsed_ms(start);

    ingest::TiledMosaicView::TileLoader loader;
    if (cache) {
        loader = [&fetcher](const geo::TileCoord& tile) { return fetcher.fetch_tile(tile); };
    } else {
        loader = [&in_memory](const geo::TileCoord& tile) { return in_memory.at(tile); };
    }
    const ingest::TiledMosaicView view(tiles, loader);
    const auto windows = ingest::plan_windows(view.width(), view.height(), config.stride);

    const auto crops_start = std::chrono::steady_clock::now();
    record.crops.resize(windows.size());
    std::vector<std::vector<detect::GlobalDetection>> lifted(windows.size());
    for_each_index(windows.size(), config.parallelism, [&](std::size_t i) {
        const auto crop = ingest::extract_crop(view, windows[i]);
        CropRecord& rec = record.crops[i];
        rec.crop_id = crop.id;
        rec.offset_x = crop.offset_x;
        rec.offset_y = crop.offset_y;
        try {
            rec.routing = config.force_interval
                              ? router::RoutingDecision{*config.force_interval, 1.0,
                                                        router::detector_id_for(*config.force_interval)}
                              : router::classify_scale(crop, config.classifier, &transport);
        } catch (const router::RoutingError& e) {
            spdlog::warn("crop {} skipped: {}", crop.id, e.what());
            rec.status = CropStatus::RoutingFailed;
            rec.error = e.what();
            return;
        }
        try {
            const auto dets = detect::detect(crop, config.detectors.at(rec.routing->interval),
                                             rec.routing->detector_id, &transport);
            rec.detections = dets.size();
            lifted[i] = detect::lift_to_global(dets, crop, rec.routing->detector_id);
        } catch (const detect::DetectionError& e) {
            spdlog::warn("crop {} skipped: {}", crop.id, e.what());
            rec.status = CropStatus::DetectionFailed;
            rec.error = e.what();
        }
    });
    record.timings.crops_ms = elapsed_ms(crops_start);

    const auto merge_start = std::chrono::steady_clock::now();
    std::vector<detect::GlobalDetection> all;
    for (auto& list : lifted) {
        all.insert(all.end(), std::make_move_iterator(list.begin()), std::make_move_iterator(list.end()));
    }
    auto merged = detect::filter_targets(detect::merge_nms(std::move(all), config.nms_iou), targets);
    std::erase_if(merged, [&](const detect::GlobalDetection& d) { return d.score < config.score_threshold; });
    record.detections = std::move(merged);
    result.geojson = detect::to_geojson(record.detections);
    record.timings.merge_ms = elapsed_ms(merge_start);

    record.exit_code = exit_code_for(record.crops.size(), record.failed_crops(), config.failure_tolerance);
    record.timings.total_ms = elapsed_ms(start);
    return result;
}

void write_outputs(const PipelineConfig& config, const RunResult& result)
{
    const auto write = [](const std::filesystem::path& path, const std::string& text) {
        if (path.has_parent_path()) {
            std::filesystem::create_directories(path.parent_path());
        }
        std::ofstream out(path, std::ios::binary);
        out << text << '\n';
        if (!out) {
            throw Error(fmt::format("cannot write {}", path));
        }
    };
    if (config.output.geojson) {
        write(*config.output.geojson, result.geojson.dump(2));
    }
    if (config.output.run_record) {
        write(*config.output.run_record, to_json(result.record).dump(2));
    }
}

}  // namespace detdsci::pipeline
