#include "detdsci/detect.hpp"

#include <algorithm>
#include <regex>
#include <tuple>

#include <fmt/format.h>

#include "detdsci/encoding.hpp"
#include "detdsci/image_codec.hpp"

namespace detdsci::detect {

using nlohmann::json;

namespace {

template <typename D>
auto order_key(const D& d, const BBox& box)
{
    return std::tie(d.label, box.x_min, box.y_min);
}

double box_iou(const BBox& a, const BBox& b)
{
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

void check(const Detection& d, const std::string& image_id)
{
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw DetectionError(fmt::format("image {}: score {} outside [0, 1]", image_id, d.score));
    }
    if (!d.bbox.valid()) {
        throw DetectionError(fmt::format("image {}: degenerate box for '{}'", image_id, d.label));
    }
}

std::vector<Detection> finish(std::vector<Detection> dets, const std::string& image_id)
{
    for (const auto& d : dets) {
        check(d, image_id);
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return detection_order(a, b); });
    if (dets.size() > kMaxDetections) {
        dets.resize(kMaxDetections);
    }
    return dets;
}

}  // namespace

bool detection_order(const Detection& a, const Detection& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return order_key(a, a.bbox) < order_key(b, b.bbox);
}

bool detection_order(const GlobalDetection& a, const GlobalDetection& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return order_key(a, a.bbox_mosaic) < order_key(b, b.bbox_mosaic);
}

void DetectorBackendRef::validate() const
{
    if ((kind == DetectorKind::RemoteService) == endpoint.empty()) {
        throw ConfigError("detector endpoint must be set exactly when kind is REMOTE_SERVICE");
    }
    if (kind == DetectorKind::RemoteService && !script.empty()) {
        throw ConfigError("a REMOTE_SERVICE detector cannot carry a script");
    }
    static const std::regex kTag("FE[1-6]");
    if (config_tag && !std::regex_match(*config_tag, kTag)) {
        throw ConfigError(fmt::format("config_tag '{}' is not one of FE1..FE6", *config_tag));
    }
}

std::string_view to_string(DetectorKind kind) noexcept
{
    return kind == DetectorKind::RemoteService ? "REMOTE_SERVICE" : "SCRIPTED_MOCK";
}

DetectorKind parse_detector_kind(std::string_view text)
{
    if (text == "REMOTE_SERVICE") {
        return DetectorKind::RemoteService;
    }
    if (text == "SCRIPTED_MOCK") {
        return DetectorKind::ScriptedMock;
    }
    throw ConfigError(fmt::format("unknown detector kind '{}'", text));
}

std::vector<Detection> parse_detect_response(const std::string& body)
{
    try {
        const auto doc = json::parse(body);
        std::vector<Detection> dets;
        for (const auto& node : doc.at("detections")) {
            const auto& b = node.at("bbox");
            if (!b.is_array() || b.size() != 4) {
                throw std::invalid_argument("bbox must be [x1, y1, x2, y2]");
            }
            dets.push_back({node.at("label").get<std::string>(), node.at("score").get<double>(),
                            {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                             b[3].get<double>()}});
        }
        return dets;
    } catch (const std::exception& e) {
        throw DetectionError(fmt::format("malformed detector answer: {}", e.what()));
    }
}

std::vector<Detection> detect_image(const std::string& image_id, const Raster* pixels,
                                    const DetectorBackendRef& backend,
                                    const std::string& detector_id, HttpTransport* transport)
{
    if (backend.kind == DetectorKind::ScriptedMock) {
        auto it = backend.script.find(image_id);
        if (it == backend.script.end()) {
            it = backend.script.find("*");
        }
        if (it == backend.script.end()) {
            return {};
        }
        if (it->second.fail) {
            throw DetectionError(fmt::format("image {}: {}", image_id,
                                             it->second.message.empty() ? "scripted failure"
                                                                        : it->second.message));
        }
        return finish(it->second.detections, image_id);
    }

    if (transport == nullptr) {
        throw DetectionError("REMOTE_SERVICE detector needs an HTTP transport");
    }
    if (pixels == nullptr) {
        throw DetectionError(fmt::format("image {}: no pixels to send to the detector", image_id));
    }
    const std::string body =
        json{{"image", base64_encode(encode_png(*pixels))}, {"detector_id", detector_id}}.dump();
    HttpResponse response;
    try {
        response = transport->post_json(backend.endpoint + kDetectPath, body);
    } catch (const TransportError& e) {
        throw DetectionError(fmt::format("image {}: detector unreachable: {}", image_id, e.what()));
    }
    if (response.status != 200) {
        throw DetectionError(fmt::format("image {}: detector answered HTTP {}", image_id, response.status));
    }
    try {
        return finish(parse_detect_response(response.body), image_id);
    } catch (const DetectionError& e) {
        throw DetectionError(fmt::format("image {}: {}", image_id, e.what()));
    }
}

std::vector<Detection> detect(const ingest::Crop& crop, const DetectorBackendRef& backend,
                              const std::string& detector_id, HttpTransport* transport)
{
    if (crop.pixels &&
        (crop.pixels->width() != ingest::kCropSize || crop.pixels->height() != ingest::kCropSize)) {
        throw DetectionError(fmt::format("crop {} is {}x{}, expected {}x{}", crop.id,
                                         crop.pixels->width(), crop.pixels->height(),
                                         ingest::kCropSize, ingest::kCropSize));
    }
    return detect_image(crop.id, crop.pixels.get(), backend, detector_id, transport);
}

std::vector<GlobalDetection> lift_to_global(const std::vector<Detection>& dets,
                                            const ingest::Crop& crop, const std::string& detector_id)
{
    const double origin_x = static_cast<double>(crop.mosaic_origin.x) * geo::kTileSize;
    const double origin_y = static_cast<double>(crop.mosaic_origin.y) * geo::kTileSize;
    const double world = crop.zoom.world_pixels();
    const auto to_geo = [&](double mx, double my) {
        return geo::pixel_to_geo({std::clamp(origin_x + mx, 0.0, world),
                                  std::clamp(origin_y + my, 0.0, world)},
                                 crop.zoom);
    };

    std::vector<GlobalDetection> out;
    out.reserve(dets.size());
    for (const auto& d : dets) {
        if (d.bbox.x_min >= crop.valid_width || d.bbox.y_min >= crop.valid_height) {
            continue;
        }
        const BBox box = d.bbox.translated(crop.offset_x, crop.offset_y);
        out.push_back({d.label, d.score, box, to_geo(box.x_min, box.y_min),
                       to_geo(box.x_max, box.y_max), crop.zoom.value(), detector_id});
    }
    return out;
}

std::vector<GlobalDetection> merge_nms(std::vector<GlobalDetection> dets, double iou_threshold)
{
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
        throw std::invalid_argument(fmt::format("NMS IoU threshold {} outside (0, 1)", iou_threshold));
    }
    std::stable_sort(dets.begin(), dets.end(), [](const GlobalDetection& a, const GlobalDetection& b) {
        return detection_order(a, b);
    });
    std::vector<GlobalDetection> kept;
    std::map<std::string, std::vector<std::size_t>> kept_by_label;
    for (auto& d : dets) {
        auto& same = kept_by_label[d.label];
        const bool suppressed = std::any_of(same.begin(), same.end(), [&](std::size_t k) {
            return box_iou(kept[k].bbox_mosaic, d.bbox_mosaic) > iou_threshold;
        });
        if (!suppressed) {
            same.push_back(kept.size());
            kept.push_back(std::move(d));
        }
    }
    return kept;
}

std::vector<GlobalDetection> filter_targets(const std::vector<GlobalDetection>& dets,
                                            const std::set<std::string>& targets)
{
    std::vector<GlobalDetection> out;
    std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
                 [&](const GlobalDetection& d) { return targets.contains(d.label); });
    return out;
}

json to_json(const GlobalDetection& det)
{
    const auto& b = det.bbox_mosaic;
    return {{"label", det.label},
            {"score", det.score},
            {"bbox_mosaic", {b.x_min, b.y_min, b.x_max, b.y_max}},
            {"geo_nw", {det.geo_nw.latitude, det.geo_nw.longitude}},
            {"geo_se", {det.geo_se.latitude, det.geo_se.longitude}},
            {"zoom", det.zoom},
            {"detector_id", det.detector_id}};
}

GlobalDetection global_detection_from_json(const json& doc)
{
    const auto& b = doc.at("bbox_mosaic");
    const auto& nw = doc.at("geo_nw");
    const auto& se = doc.at("geo_se");
    return {doc.at("label").get<std::string>(),
            doc.at("score").get<double>(),
            {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()},
            {nw.at(0).get<double>(), nw.at(1).get<double>()},
            {se.at(0).get<double>(), se.at(1).get<double>()},
            doc.at("zoom").get<int>(),
            doc.at("detector_id").get<std::string>()};
}

json to_geojson(const std::vector<GlobalDetection>& dets)
{
    json features = json::array();
    for (const auto& d : dets) {
        const double west = d.geo_nw.longitude;
        const double east = d.geo_se.longitude;
        const double north = d.geo_nw.latitude;
        const double south = d.geo_se.latitude;
        // RFC 7946 exterior ring: counter-clockwise, closed, [lon, lat].
        json ring = json::array({{west, south}, {east, south}, {east, north}, {west, north}, {west, south}});
        features.push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                            {"properties",
                             {{"label", d.label},
                              {"score", d.score},
                              {"zoom", d.zoom},
                              {"detector_id", d.detector_id}}}});
    }
    return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace detdsci::detect
