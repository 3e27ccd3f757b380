#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detdsci/box.hpp"
#include "detdsci/errors.hpp"
#include "detdsci/geo.hpp"
#include "detdsci/http.hpp"
#include "detdsci/ingest.hpp"

namespace detdsci::detect {

inline constexpr std::size_t kMaxDetections = 100;
inline constexpr double kDefaultNmsIou = 0.5;
inline constexpr const char* kDetectPath = "/v1/detect";

struct Detection {
    std::string label;
    double score = 0.0;
    /// Crop-local pixels.
    BBox bbox;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct GlobalDetection {
    std::string label;
    double score = 0.0;
    /// Mosaic-frame pixels (origin at the NW corner of the mosaic origin tile).
    BBox bbox_mosaic;
    geo::GeoPoint geo_nw;
    geo::GeoPoint geo_se;
    int zoom = 0;
    std::string detector_id;

    friend bool operator==(const GlobalDetection&, const GlobalDetection&) = default;
};

/// Descending score, then (label, x_min, y_min) ascending.
[[nodiscard]] bool detection_order(const Detection& a, const Detection& b);
[[nodiscard]] bool detection_order(const GlobalDetection& a, const GlobalDetection& b);

enum class DetectorKind { RemoteService, ScriptedMock };

/// Canned answer of a scripted backend for one image id.
struct ScriptEntry {
    std::vector<Detection> detections;
    bool fail = false;
    std::string message;
};

struct DetectorBackendRef {
    DetectorKind kind = DetectorKind::ScriptedMock;
    /// Base URL (REMOTE_SERVICE only).
    std::string endpoint;
    /// image id -> answer (SCRIPTED_MOCK only). Key "*" answers for ids
    /// without an entry; ids without either get no detections.
    std::map<std::string, ScriptEntry> script;
    /// Feature-extractor tag FE1..FE6, carried for report labels only.
    std::optional<std::string> config_tag;

    /// Throws ConfigError.
    void validate() const;
};

[[nodiscard]] std::string_view to_string(DetectorKind kind) noexcept;
[[nodiscard]] DetectorKind parse_detector_kind(std::string_view text);

/// Backend unreachable, failing, or answering outside the protocol.
class DetectionError : public Error {
public:
    using Error::Error;
};

/// Stage 2 on one crop: at most 100 detections in detection_order.
/// Throws DetectionError.
[[nodiscard]] std::vector<Detection> detect(const ingest::Crop& crop,
                                            const DetectorBackendRef& backend,
                                            const std::string& detector_id,
                                            HttpTransport* transport = nullptr);

/// Same as detect() for an image that is not a crop (evaluation harness).
[[nodiscard]] std::vector<Detection> detect_image(const std::string& image_id, const Raster* pixels,
                                                  const DetectorBackendRef& backend,
                                                  const std::string& detector_id,
                                                  HttpTransport* transport = nullptr);

/// Translates crop boxes into the mosaic frame and geo-references them.
/// Boxes lying wholly in the crop's zero padding are dropped; the others are
/// kept unclipped.
[[nodiscard]] std::vector<GlobalDetection> lift_to_global(const std::vector<Detection>& dets,
                                                          const ingest::Crop& crop,
                                                          const std::string& detector_id);

/// Greedy per-class NMS. Throws std::invalid_argument unless 0 < iou < 1.
[[nodiscard]] std::vector<GlobalDetection> merge_nms(std::vector<GlobalDetection> dets,
                                                     double iou_threshold = kDefaultNmsIou);

[[nodiscard]] std::vector<GlobalDetection> filter_targets(const std::vector<GlobalDetection>& dets,
                                                          const std::set<std::string>& targets);

[[nodiscard]] nlohmann::json to_json(const GlobalDetection& det);
[[nodiscard]] GlobalDetection global_detection_from_json(const nlohmann::json& doc);

/// FeatureCollection of Polygon features (counter-clockwise rings).
[[nodiscard]] nlohmann::json to_geojson(const std::vector<GlobalDetection>& dets);

/// Parses a /v1/detect response body. Throws DetectionError.
[[nodiscard]] std::vector<Detection> parse_detect_response(const std::string& body);

}  // namespace detdsci::detect
