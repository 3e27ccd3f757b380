#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "detdsci/dataset.hpp"
#include "detdsci/detect.hpp"
#include "detdsci/eval.hpp"
#include "detdsci/geo.hpp"
#include "detdsci/http.hpp"
#include "detdsci/ingest.hpp"
#include "detdsci/router.hpp"

namespace detdsci::pipeline {

/// Process exit statuses shared by the library and the CLI.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,
    kExitTotalFailure = 2,
    kExitPartialFailure = 3,
};

struct OutputPaths {
    std::optional<std::filesystem::path> geojson;
    std::optional<std::filesystem::path> run_record;
};

struct PipelineConfig {
    ingest::TileSource tile_source;
    ingest::RegionRequest region{{}, {}, geo::ZoomLevel(16)};
    int stride = ingest::kCropSize;
    router::ClassifierBackendRef classifier;
    /// Exactly one backend per interval.
    std::map<geo::ScaleInterval, detect::DetectorBackendRef> detectors;
    double score_threshold = 0.0;
    double nms_iou = detect::kDefaultNmsIou;
    std::size_t parallelism = 4;
    std::optional<std::filesystem::path> cache_dir;
    /// Bypasses the classifier.
    std::optional<geo::ScaleInterval> force_interval;
    /// Labels kept in the output; defaults to the detection classes of both scales.
    std::optional<std::set<std::string>> targets;
    /// Largest fraction of failed crops that still counts as success.
    double failure_tolerance = 0.0;
    OutputPaths output;

    /// Throws ConfigError. Makes no network call.
    void validate() const;
    [[nodiscard]] std::set<std::string> target_labels() const;
};

/// Strict parser: unknown keys are rejected at every level. Throws ConfigError.
[[nodiscard]] PipelineConfig config_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json to_json(const PipelineConfig& config);
[[nodiscard]] PipelineConfig load_config(const std::filesystem::path& path);

/// SHA-256 of the canonical JSON form.
[[nodiscard]] std::string config_hash(const PipelineConfig& config);

[[nodiscard]] nlohmann::json to_json(const detect::DetectorBackendRef& backend);
[[nodiscard]] detect::DetectorBackendRef detector_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json to_json(const router::ClassifierBackendRef& backend);
[[nodiscard]] router::ClassifierBackendRef classifier_from_json(const nlohmann::json& doc);

enum class CropStatus { Ok, RoutingFailed, DetectionFailed };

[[nodiscard]] std::string_view to_string(CropStatus status) noexcept;

struct CropRecord {
    std::string crop_id;
    int offset_x = 0;
    int offset_y = 0;
    CropStatus status = CropStatus::Ok;
    std::optional<router::RoutingDecision> routing;
    /// Detections returned by the backend, before merging.
    std::size_t detections = 0;
    std::string error;
};

struct Timings {
    double fetch_ms = 0.0;
    double crops_ms = 0.0;
    double merge_ms = 0.0;
    double total_ms = 0.0;
};

struct RunRecord {
    std::string config_hash;
    std::size_t tiles = 0;
    std::vector<CropRecord> crops;
    std::vector<detect::GlobalDetection> detections;
    std::vector<std::string> targets;
    /// Set when the run could not start processing crops (e.g. tile failure).
    std::string fatal_error;
    int exit_code = kExitOk;
    Timings timings;

    [[nodiscard]] std::size_t failed_crops() const;
};

/// `include_timings = false` yields a document that is identical across
/// repeated runs of the same config.
[[nodiscard]] nlohmann::json to_json(const RunRecord& record, bool include_timings = true);
[[nodiscard]] RunRecord run_record_from_json(const nlohmann::json& doc);

/// 0 when nothing failed or failures stay within `tolerance`, 2 when no
/// crop succeeded, 3 otherwise.
[[nodiscard]] int exit_code_for(std::size_t crops, std::size_t failed, double tolerance);

struct RunResult {
    RunRecord record;
    nlohmann::json geojson;
};

/// fetch -> mosaic -> slice -> classify -> detect -> lift -> merge -> filter.
/// Crop failures are recorded, never fatal. Throws ConfigError before any
/// network call when the config is invalid.
[[nodiscard]] RunResult run(const PipelineConfig& config, HttpTransport& transport);

/// Writes the GeoJSON and run record to the configured output paths.
void write_outputs(const PipelineConfig& config, const RunResult& result);

// ---- comparison harness ----

enum class ArmMode { DetDSCI, BaseDet, LsOnly, SsOnly };

[[nodiscard]] std::string_view to_string(ArmMode mode) noexcept;
[[nodiscard]] ArmMode parse_arm_mode(std::string_view text);

inline constexpr const char* kBaseDetectorId = "Base_Det";

struct ArmSpec {
    std::string name;
    ArmMode mode = ArmMode::DetDSCI;
    router::ClassifierBackendRef classifier;
    /// DetDSCI uses both, LsOnly the LARGE one, SsOnly the SMALL one.
    std::map<geo::ScaleInterval, detect::DetectorBackendRef> detectors;
    /// BaseDet only.
    std::optional<detect::DetectorBackendRef> base_detector;

    /// Throws ConfigError when a backend the mode needs is missing.
    void validate() const;
};

/// Hash over the mode and the backends this arm actually uses.
[[nodiscard]] std::string arm_hash(const ArmSpec& arm);

struct ComparisonSpec {
    std::vector<ArmSpec> arms;
    std::set<std::string> targets{"electrical substation", "airport"};
    double score_threshold = 0.0;
    double count_iou = 0.5;
    std::size_t parallelism = 4;
    /// Directory holding the test images, for backends that need pixels.
    std::optional<std::filesystem::path> image_root;
};

[[nodiscard]] ComparisonSpec comparison_from_json(const nlohmann::json& doc);

struct ArmOutput {
    std::string arm;
    ArmMode mode = ArmMode::DetDSCI;
    std::string config_hash;
    eval::ImageDetections detections;
    /// image_ref -> error message.
    std::map<std::string, std::string> failures;
};

using ImageLoader = std::function<Raster(const dataset::AnnotatedImage&)>;

/// Runs one arm over every test image. Pixels are loaded only when a remote
/// backend needs them.
[[nodiscard]] ArmOutput run_arm(const ArmSpec& arm, std::span<const dataset::AnnotatedImage> images,
                                const ComparisonSpec& spec, HttpTransport* transport,
                                const ImageLoader& loader = {});

struct Counts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct ArmResult {
    std::string arm;
    std::string config_hash;
    /// False when the arm has failed images or no output at all.
    bool complete = true;
    std::size_t failed_images = 0;
    std::optional<Counts> counts;
    std::optional<eval::PRF1> scores;
    std::optional<eval::EvalReport> report;
};

/// Difference `to - from` in percentage points.
struct Delta {
    std::string from;
    std::string to;
    double precision_pp = 0.0;
    double recall_pp = 0.0;
    double f1_pp = 0.0;
};

struct ComparisonReport {
    std::vector<ArmResult> arms;
    std::vector<Delta> deltas;
};

/// Scores each arm on the target classes. Arms named in `spec` but absent
/// from `outputs` are reported incomplete with no metrics.
[[nodiscard]] ComparisonReport evaluate_arms(std::span<const dataset::AnnotatedImage> ground_truth,
                                             std::span<const ArmOutput> outputs,
                                             const ComparisonSpec& spec);

/// Comparison from already-counted TP/FP/FN per arm, in the given order.
[[nodiscard]] ComparisonReport compare_counts(
    const std::vector<std::pair<std::string, Counts>>& arms);

/// Pairwise deltas: for i < j, arms[j] - arms[i].
[[nodiscard]] std::vector<Delta> pairwise_deltas(const std::vector<ArmResult>& arms);

[[nodiscard]] nlohmann::json to_json(const ComparisonReport& report);
[[nodiscard]] ComparisonReport comparison_report_from_json(const nlohmann::json& doc);

[[nodiscard]] nlohmann::json to_json(const ArmOutput& output);
[[nodiscard]] ArmOutput arm_output_from_json(const nlohmann::json& doc);

}  // namespace detdsci::pipeline
