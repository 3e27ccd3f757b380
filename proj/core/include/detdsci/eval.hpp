#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "detdsci/box.hpp"
#include "detdsci/dataset.hpp"
#include "detdsci/detect.hpp"

namespace detdsci::eval {

/// 0.50, 0.55, ..., 0.95.
inline constexpr std::array<double, 10> kIouThresholds{0.50, 0.55, 0.60, 0.65, 0.70,
                                                       0.75, 0.80, 0.85, 0.90, 0.95};
inline constexpr std::size_t kRecallSamples = 101;
inline constexpr std::size_t kMaxDetsPerImage = 100;

/// Throws std::domain_error when either box is degenerate.
[[nodiscard]] double iou(const BBox& a, const BBox& b);

struct ClassMatch {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    /// (detection index, ground-truth index) into the inputs of match().
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

struct MatchResult {
    double iou_threshold = 0.5;
    std::map<std::string, ClassMatch> per_class;
};

/// Greedy matching in input order (callers pass detections sorted by score):
/// each detection takes the unmatched same-class ground truth with the
/// highest IoU >= threshold, the earliest one on ties.
[[nodiscard]] MatchResult match(std::span<const detect::Detection> dets,
                                std::span<const dataset::Instance> gts, double iou_threshold);

struct PRF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Fractions in [0, 1]; a ratio with a zero denominator is 0.
[[nodiscard]] PRF1 prf1(std::size_t tp, std::size_t fp, std::size_t fn);

struct PRCurve {
    std::string label;
    double iou_threshold = 0.5;
    std::size_t gt_count = 0;
    /// (recall, precision) after each detection, in score order.
    std::vector<std::pair<double, double>> points;
    /// Envelope precision sampled at recall 0, 0.01, ..., 1.
    std::array<double, kRecallSamples> interpolated{};
};

/// Builds the curve from detections in score order, each flagged TP or FP.
[[nodiscard]] PRCurve make_curve(std::string label, double iou_threshold, std::size_t gt_count,
                                 const std::vector<bool>& is_tp);

/// 101-point interpolated area under the precision envelope.
[[nodiscard]] double average_precision(const PRCurve& curve);
/// Mean over the given per-threshold curves.
[[nodiscard]] double average_precision(std::span<const PRCurve> curves);

/// Mean of the per-threshold recalls.
[[nodiscard]] double average_recall(std::span<const double> recalls);

enum class SizeBucket { Small, Medium, Large };

[[nodiscard]] std::string_view to_string(SizeBucket bucket) noexcept;

/// area < 32^2 small, < 96^2 medium, else large.
[[nodiscard]] SizeBucket size_bucket(const BBox& box);

using ImageDetections = std::map<std::string, std::vector<detect::Detection>>;

struct EvalOptions {
    /// Classes to report; defaults to every label seen in ground truth or detections.
    std::optional<std::set<std::string>> classes;
    /// Detections below this score are left out of the TP/FP/FN counts (not of AP).
    double score_threshold = 0.0;
    std::size_t max_dets = kMaxDetsPerImage;
    double count_iou = 0.5;
};

struct ClassMetrics {
    std::string label;
    std::size_t gt_count = 0;
    std::optional<double> ap50;
    std::optional<double> ap;
    std::optional<double> ar;
    /// Per size bucket; unset when the class has no ground truth there.
    std::array<std::optional<double>, 3> ap_by_size{};
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    PRF1 scores;
};

struct EvalReport {
    std::vector<ClassMetrics> classes;
    /// Means over classes present in ground truth; unset when there are none.
    std::optional<double> map50;
    std::optional<double> map;
    std::optional<double> mar;
    std::array<std::optional<double>, 3> map_by_size{};
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    PRF1 scores;
    double score_threshold = 0.0;
    std::size_t images = 0;
    /// Detection image ids with no ground-truth entry (not scored).
    std::vector<std::string> unmatched_images;
    std::vector<PRCurve> curves;
};

[[nodiscard]] EvalReport evaluate(std::span<const dataset::AnnotatedImage> ground_truth,
                                  const ImageDetections& detections, const EvalOptions& options = {});

[[nodiscard]] nlohmann::json to_json(const EvalReport& report);
/// Curves are not part of the JSON document.
[[nodiscard]] EvalReport report_from_json(const nlohmann::json& doc);
[[nodiscard]] std::string render_table(const EvalReport& report);
/// label,iou_threshold,recall,precision rows.
[[nodiscard]] std::string curves_csv(const EvalReport& report);

/// {"image_id": [{label, score, bbox:[x1,y1,x2,y2]}]}.
[[nodiscard]] ImageDetections detections_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json detections_to_json(const ImageDetections& dets);

}  // namespace detdsci::eval
