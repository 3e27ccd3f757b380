#include <algorithm>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "detdsci/encoding.hpp"
#include "detdsci/pipeline.hpp"
#include "detdsci/worker_pool.hpp"
#include "json_util.hpp"

namespace detdsci::pipeline {

using nlohmann::json;
using detail::check_keys;
using detail::optional;
using detail::required;

std::string_view to_string(ArmMode mode) noexcept
{
    switch (mode) {
    case ArmMode::BaseDet:
        return "BASE_DET";
    case ArmMode::LsOnly:
        return "LS_ONLY";
    case ArmMode::SsOnly:
        return "SS_ONLY";
    case ArmMode::DetDSCI:
        break;
    }
    return "DETDSCI";
}

ArmMode parse_arm_mode(std::string_view text)
{
    for (const auto mode : {ArmMode::DetDSCI, ArmMode::BaseDet, ArmMode::LsOnly, ArmMode::SsOnly}) {
        if (text == to_string(mode)) {
            return mode;
        }
    }
    throw ConfigError(fmt::format("unknown arm mode '{}'", text));
}

namespace {

const detect::DetectorBackendRef& needed(const ArmSpec& arm, geo::ScaleInterval interval)
{
    const auto it = arm.detectors.find(interval);
    if (it == arm.detectors.end()) {
        throw ConfigError(fmt::format("arm '{}' ({}) needs a {} detector", arm.name,
                                      to_string(arm.mode), geo::to_string(interval)));
    }
    return it->second;
}

/// Backends the arm calls, keyed by the detector id they answer for.
std::map<std::string, const detect::DetectorBackendRef*> used_detectors(const ArmSpec& arm)
{
    std::map<std::string, const detect::DetectorBackendRef*> out;
    switch (arm.mode) {
    case ArmMode::DetDSCI:
        out[router::kLargeDetectorId] = &needed(arm, geo::ScaleInterval::Large);
        out[router::kSmallDetectorId] = &needed(arm, geo::ScaleInterval::Small);
        break;
    case ArmMode::LsOnly:
        out[router::kLargeDetectorId] = &needed(arm, geo::ScaleInterval::Large);
        break;
    case ArmMode::SsOnly:
        out[router::kSmallDetectorId] = &needed(arm, geo::ScaleInterval::Small);
        break;
    case ArmMode::BaseDet:
        if (!arm.base_detector) {
            throw ConfigError(fmt::format("arm '{}' (BASE_DET) needs a base_detector", arm.name));
        }
        out[kBaseDetectorId] = &*arm.base_detector;
        break;
    }
    return out;
}

bool needs_pixels(const ArmSpec& arm)
{
    if (arm.mode == ArmMode::DetDSCI && arm.classifier.kind == router::ClassifierKind::RemoteService) {
        return true;
    }
    const auto used = used_detectors(arm);
    return std::any_of(used.begin(), used.end(), [](const auto& kv) {
        return kv.second->kind == detect::DetectorKind::RemoteService;
    });
}

json counts_json(const Counts& c)
{
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
}

}  // namespace

void ArmSpec::validate() const
{
    if (name.empty()) {
        throw ConfigError("comparison arm without a name");
    }
    for (const auto& [id, backend] : used_detectors(*this)) {
        backend->validate();
    }
    if (mode == ArmMode::DetDSCI) {
        classifier.validate();
    }
}

std::string arm_hash(const ArmSpec& arm)
{
    json doc{{"mode", to_string(arm.mode)}};
    for (const auto& [id, backend] : used_detectors(arm)) {
        doc["detectors"][id] = to_json(*backend);
    }
    if (arm.mode == ArmMode::DetDSCI) {
        doc["classifier"] = to_json(arm.classifier);
    }
    return sha256_hex(doc.dump());
}

ComparisonSpec comparison_from_json(const json& doc)
{
    constexpr std::string_view where = "comparison";
    check_keys(doc, {"arms", "targets", "score_threshold", "count_iou", "parallelism", "image_root"}, where);
    ComparisonSpec spec;
    const auto& arms = required<json>(doc, "arms", where);
    if (!arms.is_array() || arms.empty()) {
        throw ConfigError("comparison.arms must be a non-empty array");
    }
    std::set<std::string> names;
    for (const auto& node : arms) {
        const std::string arm_where = "comparison.arms[]";
        check_keys(node, {"name", "mode", "classifier", "detectors", "base_detector"}, arm_where);
        ArmSpec arm;
        arm.name = required<std::string>(node, "name", arm_where);
        arm.mode = parse_arm_mode(required<std::string>(node, "mode", arm_where));
        if (const auto it = node.find("classifier"); it != node.end()) {
            arm.classifier = classifier_from_json(*it);
        }
        if (const auto it = node.find("detectors"); it != node.end()) {
            check_keys(*it, {"LARGE", "SMALL"}, arm_where + ".detectors");
            for (const auto& [key, value] : it->items()) {
                arm.detectors.emplace(geo::parse_scale_interval(key), detector_from_json(value));
            }
        }
        if (const auto it = node.find("base_detector"); it != node.end()) {
            arm.base_detector = detector_from_json(*it);
        }
        arm.validate();
        if (!names.insert(arm.name).second) {
            throw ConfigError(fmt::format("duplicate arm name '{}'", arm.name));
        }
        spec.arms.push_back(std::move(arm));
    }
    if (const auto it = doc.find("targets"); it != doc.end()) {
        const auto list = required<std::vector<std::string>>(doc, "targets", where);
        spec.targets = {list.begin(), list.end()};
    }
    spec.score_threshold = optional<double>(doc, "score_threshold", 0.0, where);
    spec.count_iou = optional<double>(doc, "count_iou", 0.5, where);
    const auto parallelism = optional<std::int64_t>(doc, "parallelism", 4, where);
    if (parallelism < 1) {
        throw ConfigError("comparison.parallelism must be at least 1");
    }
    spec.parallelism = static_cast<std::size_t>(parallelism);
    if (const auto root = optional<std::string>(doc, "image_root", "", where); !root.empty()) {
        spec.image_root = root;
    }
    return spec;
}

ArmOutput run_arm(const ArmSpec& arm, std::span<const dataset::AnnotatedImage> images,
                  const ComparisonSpec& spec, HttpTransport* transport, const ImageLoader& loader)
{
    arm.validate();
    ArmOutput output{arm.name, arm.mode, arm_hash(arm), {}, {}};
    const bool pixels_needed = needs_pixels(arm);
    if (pixels_needed && !loader) {
        throw ConfigError(fmt::format("arm '{}' uses a remote backend but no image loader was given", arm.name));
    }

    struct Slot {
        std::vector<detect::Detection> dets;
        std::optional<std::string> error;
    };
    std::vector<Slot> slots(images.size());
    for_each_index(images.size(), spec.parallelism, [&](std::size_t i) {
        const auto& image = images[i];
        Slot& slot = slots[i];
        try {
            ingest::Crop crop{image.image_ref, image.zoom.value_or(geo::ZoomLevel(0)),
                              geo::TileCoord(geo::ZoomLevel(0), 0, 0), 0, 0,
                              ingest::kCropSize, ingest::kCropSize, nullptr};
            double sx = 1.0;
            double sy = 1.0;
            if (pixels_needed) {
                Raster raw = loader(image);
                sx = static_cast<double>(raw.width()) / ingest::kCropSize;
                sy = static_cast<double>(raw.height()) / ingest::kCropSize;
                crop.pixels = std::make_shared<const Raster>(
                    raw.width() == ingest::kCropSize && raw.height() == ingest::kCropSize
                        ? std::move(raw)
                        : ingest::resize_to_crop(raw));
            }

            const detect::DetectorBackendRef* backend = nullptr;
            std::string detector_id;
            switch (arm.mode) {
            case ArmMode::DetDSCI: {
                if (!image.zoom && arm.classifier.kind == router::ClassifierKind::MetadataOracle) {
                    throw router::RoutingError(
                        fmt::format("image {} has no zoom for metadata routing", image.image_ref));
                }
                const auto decision = router::classify_scale(crop, arm.classifier, transport);
                backend = &arm.detectors.at(decision.interval);
                detector_id = decision.detector_id;
                break;
            }
            case ArmMode::LsOnly:
                backend = &arm.detectors.at(geo::ScaleInterval::Large);
                detector_id = router::kLargeDetectorId;
                break;
            case ArmMode::SsOnly:
                backend = &arm.detectors.at(geo::ScaleInterval::Small);
                detector_id = router::kSmallDetectorId;
                break;
            case ArmMode::BaseDet:
                backend = &*arm.base_detector;
                detector_id = kBaseDetectorId;
                break;
            }

            auto dets = detect::detect(crop, *backend, detector_id, transport);
            for (auto& d : dets) {
                // Remote answers are in detector-input pixels.
                if (backend->kind == detect::DetectorKind::RemoteService) {
                    d.bbox = {d.bbox.x_min * sx, d.bbox.y_min * sy, d.bbox.x_max * sx, d.bbox.y_max * sy};
                }
            }
            std::erase_if(dets, [&](const detect::Detection& d) { return !spec.targets.contains(d.label); });
            slot.dets = std::move(dets);
        } catch (const Error& e) {
            slot.error = e.what();
        }
    });

    for (std::size_t i = 0; i < images.size(); ++i) {
        if (slots[i].error) {
            spdlog::warn("arm {}: image {} failed: {}", arm.name, images[i].image_ref, *slots[i].error);
            output.failures[images[i].image_ref] = *slots[i].error;
        } else {
            output.detections[images[i].image_ref] = std::move(slots[i].dets);
        }
    }
    return output;
}

std::vector<Delta> pairwise_deltas(const std::vector<ArmResult>& arms)
{
    std::vector<Delta> out;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        for (std::size_t j = i + 1; j < arms.size(); ++j) {
            if (!arms[i].scores || !arms[j].scores) {
                continue;
            }
            const auto& a = *arms[i].scores;
            const auto& b = *arms[j].scores;
            out.push_back({arms[i].arm, arms[j].arm, (b.precision - a.precision) * 100.0,
                           (b.recall - a.recall) * 100.0, (b.f1 - a.f1) * 100.0});
        }
    }
    return out;
}

ComparisonReport evaluate_arms(std::span<const dataset::AnnotatedImage> ground_truth,
                               std::span<const ArmOutput> outputs, const ComparisonSpec& spec)
{
    ComparisonReport report;
    for (const auto& arm : spec.arms) {
        ArmResult result{arm.name, arm_hash(arm), false, 0, std::nullopt, std::nullopt, std::nullopt};
        const auto it = std::find_if(outputs.begin(), outputs.end(),
                                     [&](const ArmOutput& o) { return o.arm == arm.name; });
        if (it == outputs.end()) {
            spdlog::warn("arm {} has no outputs; reported incomplete", arm.name);
            report.arms.push_back(std::move(result));
            continue;
        }
        eval::EvalOptions options;
        options.classes = spec.targets;
        options.score_threshold = spec.score_threshold;
        options.count_iou = spec.count_iou;
        auto eval_report = eval::evaluate(ground_truth, it->detections, options);
        result.config_hash = it->config_hash;
        result.failed_images = it->failures.size();
        result.complete = it->failures.empty();
        result.counts = Counts{eval_report.tp, eval_report.fp, eval_report.fn};
        result.scores = eval_report.scores;
        result.report = std::move(eval_report);
        report.arms.push_back(std::move(result));
    }
    report.deltas = pairwise_deltas(report.arms);
    return report;
}

ComparisonReport compare_counts(const std::vector<std::pair<std::string, Counts>>& arms)
{
    ComparisonReport report;
    for (const auto& [name, counts] : arms) {
        report.arms.push_back({name, "", true, 0, counts, eval::prf1(counts.tp, counts.fp, counts.fn),
                               std::nullopt});
    }
    report.deltas = pairwise_deltas(report.arms);
    return report;
}

json to_json(const ComparisonReport& report)
{
    json arms = json::array();
    for (const auto& a : report.arms) {
        json node{{"arm", a.arm},
                  {"config_hash", a.config_hash},
                  {"complete", a.complete},
                  {"failed_images", a.failed_images}};
        node["counts"] = a.counts ? counts_json(*a.counts) : json(nullptr);
        node["scores"] = a.scores ? json{{"precision", a.scores->precision},
                                         {"recall", a.scores->recall},
                                         {"f1", a.scores->f1}}
                                  : json(nullptr);
        if (a.report) {
            node["report"] = eval::to_json(*a.report);
        }
        arms.push_back(std::move(node));
    }
    json deltas = json::array();
    for (const auto& d : report.deltas) {
        deltas.push_back({{"from", d.from},
                          {"to", d.to},
                          {"precision_pp", d.precision_pp},
                          {"recall_pp", d.recall_pp},
                          {"f1_pp", d.f1_pp}});
    }
    return {{"arms", std::move(arms)}, {"deltas", std::move(deltas)}};
}

ComparisonReport comparison_report_from_json(const json& doc)
{
    try {
        ComparisonReport report;
        for (const auto& node : doc.at("arms")) {
            ArmResult a;
            a.arm = node.at("arm").get<std::string>();
            a.config_hash = node.at("config_hash").get<std::string>();
            a.complete = node.at("complete").get<bool>();
            a.failed_images = node.at("failed_images").get<std::size_t>();
            if (const auto& c = node.at("counts"); !c.is_null()) {
                a.counts = Counts{c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                                  c.at("fn").get<std::size_t>()};
            }
            if (const auto& s = node.at("scores"); !s.is_null()) {
                a.scores = eval::PRF1{s.at("precision").get<double>(), s.at("recall").get<double>(),
                                      s.at("f1").get<double>()};
            }
            if (const auto r = node.find("report"); r != node.end()) {
                a.report = eval::report_from_json(*r);
            }
            report.arms.push_back(std::move(a));
        }
        for (const auto& d : doc.at("deltas")) {
            report.deltas.push_back({d.at("from").get<std::string>(), d.at("to").get<std::string>(),
                                     d.at("precision_pp").get<double>(), d.at("recall_pp").get<double>(),
                                     d.at("f1_pp").get<double>()});
        }
        return report;
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("malformed comparison report: {}", e.what()));
    }
}

json to_json(const ArmOutput& output)
{
    json failures = json::object();
    for (const auto& [image, error] : output.failures) {
        failures[image] = error;
    }
    return {{"arm", output.arm},
            {"mode", to_string(output.mode)},
            {"config_hash", output.config_hash},
            {"detections", eval::detections_to_json(output.detections)},
            {"failures", std::move(failures)}};
}

ArmOutput arm_output_from_json(const json& doc)
{
    try {
        ArmOutput out;
        out.arm = doc.at("arm").get<std::string>();
        out.mode = parse_arm_mode(doc.at("mode").get<std::string>());
        out.config_hash = doc.at("config_hash").get<std::string>();
        out.detections = eval::detections_from_json(doc.at("detections"));
        out.failures = doc.at("failures").get<std::map<std::string, std::string>>();
        return out;
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("malformed arm output: {}", e.what()));
    }
}

}  // namespace detdsci::pipeline
