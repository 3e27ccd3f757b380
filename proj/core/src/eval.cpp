#include "detdsci/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace detdsci::eval {

using nlohmann::json;

double iou(const BBox& a, const BBox& b)
{
    if (!a.valid() || !b.valid()) {
        throw std::domain_error("IoU of a degenerate box");
    }
    const double inter = intersection_area(a, b);
    return inter / (a.area() + b.area() - inter);
}

namespace {

/// One detection/GT pairing pass with COCO-style ignore flags. Ignored
/// ground truths are only taken when no regular one qualifies.
struct Pass {
    std::vector<int> det_gt;  // matched gt index or -1
};

Pass greedy_pass(std::span<const BBox> dets, std::span<const BBox> gts,
                 std::span<const char> gt_ignore, double threshold)
{
    std::vector<std::size_t> order(gts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_partition(order.begin(), order.end(),
                          [&](std::size_t g) { return gt_ignore.empty() || gt_ignore[g] == 0; });

    std::vector<bool> taken(gts.size(), false);
    Pass pass{std::vector<int>(dets.size(), -1)};
    for (std::size_t d = 0; d < dets.size(); ++d) {
        int best = -1;
        double best_iou = -1.0;
        for (const std::size_t g : order) {
            if (taken[g]) {
                continue;
            }
            const bool ignored = !gt_ignore.empty() && gt_ignore[g] != 0;
            if (best >= 0 && ignored && gt_ignore[static_cast<std::size_t>(best)] == 0) {
                break;
            }
            const double v = iou(dets[d], gts[g]);
            if (v >= threshold && v > best_iou) {
                best = static_cast<int>(g);
                best_iou = v;
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = true;
            pass.det_gt[d] = best;
        }
    }
    return pass;
}

std::array<double, kRecallSamples> recall_samples()
{
    // Same grid as numpy.linspace(0, 1, 101).
    std::array<double, kRecallSamples> r{};
    for (std::size_t i = 0; i + 1 < kRecallSamples; ++i) {
        r[i] = static_cast<double>(i) * 0.01;
    }
    r.back() = 1.0;
    return r;
}

std::optional<double> mean_of(const std::vector<double>& values)
{
    if (values.empty()) {
        return std::nullopt;
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

constexpr std::array<SizeBucket, 3> kBuckets{SizeBucket::Small, SizeBucket::Medium, SizeBucket::Large};

}  // namespace

MatchResult match(std::span<const detect::Detection> dets, std::span<const dataset::Instance> gts,
                  double iou_threshold)
{
    std::set<std::string> labels;
    for (const auto& d : dets) {
        labels.insert(d.label);
    }
    for (const auto& g : gts) {
        labels.insert(g.label);
    }

    MatchResult result{iou_threshold, {}};
    for (const auto& label : labels) {
        std::vector<std::size_t> det_idx;
        std::vector<std::size_t> gt_idx;
        std::vector<BBox> det_boxes;
        std::vector<BBox> gt_boxes;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (dets[i].label == label) {
                det_idx.push_back(i);
                det_boxes.push_back(dets[i].bbox);
            }
        }
        for (std::size_t i = 0; i < gts.size(); ++i) {
            if (gts[i].label == label) {
                gt_idx.push_back(i);
                gt_boxes.push_back(gts[i].bbox);
            }
        }
        const Pass pass = greedy_pass(det_boxes, gt_boxes, {}, iou_threshold);
        ClassMatch cm;
        for (std::size_t d = 0; d < pass.det_gt.size(); ++d) {
            if (pass.det_gt[d] >= 0) {
                ++cm.tp;
                cm.pairs.emplace_back(det_idx[d], gt_idx[static_cast<std::size_t>(pass.det_gt[d])]);
            } else {
                ++cm.fp;
            }
        }
        cm.fn = gt_boxes.size() - cm.tp;
        result.per_class.emplace(label, std::move(cm));
    }
    return result;
}

PRF1 prf1(std::size_t tp, std::size_t fp, std::size_t fn)
{
    const auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    const double t = static_cast<double>(tp);
    PRF1 out{ratio(t, t + static_cast<double>(fp)), ratio(t, t + static_cast<double>(fn)), 0.0};
    // 2TP / (2TP + FP + FN) equals the harmonic mean and stays exact in
    // the empty case.
    out.f1 = ratio(2.0 * t, 2.0 * t + static_cast<double>(fp) + static_cast<double>(fn));
    return out;
}

PRCurve make_curve(std::string label, double iou_threshold, std::size_t gt_count,
                   const std::vector<bool>& is_tp)
{
    PRCurve curve{std::move(label), iou_threshold, gt_count, {}, {}};
    if (gt_count == 0) {
        return curve;
    }
    std::size_t tp = 0;
    std::size_t fp = 0;
    curve.points.reserve(is_tp.size());
    for (const bool hit : is_tp) {
        hit ? ++tp : ++fp;
        curve.points.emplace_back(static_cast<double>(tp) / static_cast<double>(gt_count),
                                  static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    std::vector<double> envelope(curve.points.size());
    double running = 0.0;
    for (std::size_t i = curve.points.size(); i-- > 0;) {
        running = std::max(running, curve.points[i].second);
        envelope[i] = running;
    }
    const auto samples = recall_samples();
    for (std::size_t s = 0; s < kRecallSamples; ++s) {
        const auto it = std::lower_bound(
            curve.points.begin(), curve.points.end(), samples[s],
            [](const std::pair<double, double>& p, double r) { return p.first < r; });
        const auto idx = static_cast<std::size_t>(it - curve.points.begin());
        curve.interpolated[s] = idx < envelope.size() ? envelope[idx] : 0.0;
    }
    return curve;
}

double average_precision(const PRCurve& curve)
{
    return std::accumulate(curve.interpolated.begin(), curve.interpolated.end(), 0.0) /
           static_cast<double>(kRecallSamples);
}

double average_precision(std::span<const PRCurve> curves)
{
    if (curves.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& c : curves) {
        sum += average_precision(c);
    }
    return sum / static_cast<double>(curves.size());
}

double average_recall(std::span<const double> recalls)
{
    if (recalls.empty()) {
        return 0.0;
    }
    return std::accumulate(recalls.begin(), recalls.end(), 0.0) / static_cast<double>(recalls.size());
}

std::string_view to_string(SizeBucket bucket) noexcept
{
    switch (bucket) {
    case SizeBucket::Small:
        return "small";
    case SizeBucket::Medium:
        return "medium";
    case SizeBucket::Large:
        break;
    }
    return "large";
}

SizeBucket size_bucket(const BBox& box)
{
    const double area = box.area();
    if (area < 32.0 * 32.0) {
        return SizeBucket::Small;
    }
    return area < 96.0 * 96.0 ? SizeBucket::Medium : SizeBucket::Large;
}

namespace {

struct ImageData {
    std::vector<detect::Detection> dets;  // capped, in detection order
    const dataset::AnnotatedImage* gt = nullptr;
};

struct CurveInputs {
    std::vector<bool> is_tp;
    std::size_t gt_count = 0;
    std::size_t tp = 0;
};

/// Scores one class at one threshold over all images, optionally restricted
/// to one size bucket.
CurveInputs collect(const std::vector<ImageData>& images, const std::string& label, double threshold,
                    std::optional<SizeBucket> bucket)
{
    struct Scored {
        double score;
        bool tp;
    };
    std::vector<Scored> scored;
    CurveInputs out;
    for (const auto& image : images) {
        std::vector<BBox> det_boxes;
        std::vector<double> det_scores;
        for (const auto& d : image.dets) {
            if (d.label == label) {
                det_boxes.push_back(d.bbox);
                det_scores.push_back(d.score);
            }
        }
        std::vector<BBox> gt_boxes;
        std::vector<char> ig;
        for (const auto& g : image.gt->instances) {
            if (g.label == label) {
                gt_boxes.push_back(g.bbox);
                const bool ignored = bucket && size_bucket(g.bbox) != *bucket;
                ig.push_back(ignored ? 1 : 0);
                out.gt_count += ignored ? 0 : 1;
            }
        }
        const Pass pass = greedy_pass(det_boxes, gt_boxes, ig, threshold);
        for (std::size_t d = 0; d < det_boxes.size(); ++d) {
            const int g = pass.det_gt[d];
            if (g >= 0) {
                if (ig[static_cast<std::size_t>(g)] == 0) {
                    scored.push_back({det_scores[d], true});
                }
            } else if (!bucket || size_bucket(det_boxes[d]) == *bucket) {
                scored.push_back({det_scores[d], false});
            }
        }
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.score > b.score; });
    out.is_tp.reserve(scored.size());
    for (const auto& s : scored) {
        out.is_tp.push_back(s.tp);
        out.tp += s.tp ? 1 : 0;
    }
    return out;
}

}  // namespace

EvalReport evaluate(std::span<const dataset::AnnotatedImage> ground_truth,
                    const ImageDetections& detections, const EvalOptions& options)
{
    EvalReport report;
    report.score_threshold = options.score_threshold;
    report.images = ground_truth.size();

    std::map<std::string, std::size_t> gt_index;
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        gt_index.emplace(ground_truth[i].image_ref, i);
    }
    for (const auto& [image_id, dets] : detections) {
        if (!gt_index.contains(image_id)) {
            report.unmatched_images.push_back(image_id);
        }
    }

    std::set<std::string> classes;
    if (options.classes) {
        classes = *options.classes;
    } else {
        for (const auto& image : ground_truth) {
            for (const auto& g : image.instances) {
                classes.insert(g.label);
            }
        }
        for (const auto& [image_id, dets] : detections) {
            if (gt_index.contains(image_id)) {
                for (const auto& d : dets) {
                    classes.insert(d.label);
                }
            }
        }
    }

    std::vector<ImageData> images(ground_truth.size());
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        images[i].gt = &ground_truth[i];
        if (const auto it = detections.find(ground_truth[i].image_ref); it != detections.end()) {
            for (const auto& d : it->second) {
                if (classes.contains(d.label)) {
                    images[i].dets.push_back(d);
                }
            }
            std::stable_sort(images[i].dets.begin(), images[i].dets.end(),
                             [](const detect::Detection& a, const detect::Detection& b) {
                                 return detect::detection_order(a, b);
                             });
            if (images[i].dets.size() > options.max_dets) {
                images[i].dets.resize(options.max_dets);
            }
        }
    }

    std::vector<double> ap50s;
    std::vector<double> aps;
    std::vector<double> ars;
    std::array<std::vector<double>, 3> bucket_aps;
    for (const auto& label : classes) {
        ClassMetrics cm;
        cm.label = label;
        std::vector<PRCurve> curves;
        std::vector<double> recalls;
        for (const double t : kIouThresholds) {
            const auto in = collect(images, label, t, std::nullopt);
            cm.gt_count = in.gt_count;
            curves.push_back(make_curve(label, t, in.gt_count, in.is_tp));
            if (in.gt_count > 0) {
                recalls.push_back(static_cast<double>(in.tp) / static_cast<double>(in.gt_count));
            }
        }
        if (cm.gt_count > 0) {
            cm.ap50 = average_precision(curves.front());
            cm.ap = average_precision(curves);
            cm.ar = average_recall(recalls);
            ap50s.push_back(*cm.ap50);
            aps.push_back(*cm.ap);
            ars.push_back(*cm.ar);
            for (std::size_t b = 0; b < kBuckets.size(); ++b) {
                std::vector<PRCurve> bucket_curves;
                for (const double t : kIouThresholds) {
                    const auto in = collect(images, label, t, kBuckets[b]);
                    if (in.gt_count == 0) {
                        break;
                    }
                    bucket_curves.push_back(make_curve(label, t, in.gt_count, in.is_tp));
                }
                if (!bucket_curves.empty()) {
                    cm.ap_by_size[b] = average_precision(bucket_curves);
                    bucket_aps[b].push_back(*cm.ap_by_size[b]);
                }
            }
        }
        report.curves.insert(report.curves.end(), std::make_move_iterator(curves.begin()),
                             std::make_move_iterator(curves.end()));

        for (const auto& image : images) {
            std::vector<detect::Detection> kept;
            for (const auto& d : image.dets) {
                if (d.label == label && d.score >= options.score_threshold) {
                    kept.push_back(d);
                }
            }
            std::vector<dataset::Instance> gts;
            for (const auto& g : image.gt->instances) {
                if (g.label == label) {
                    gts.push_back(g);
                }
            }
            const auto m = match(kept, gts, options.count_iou);
            if (const auto it = m.per_class.find(label); it != m.per_class.end()) {
                cm.tp += it->second.tp;
                cm.fp += it->second.fp;
                cm.fn += it->second.fn;
            }
        }
        cm.scores = prf1(cm.tp, cm.fp, cm.fn);
        report.tp += cm.tp;
        report.fp += cm.fp;
        report.fn += cm.fn;
        report.classes.push_back(std::move(cm));
    }

    report.map50 = mean_of(ap50s);
    report.map = mean_of(aps);
    report.mar = mean_of(ars);
    for (std::size_t b = 0; b < kBuckets.size(); ++b) {
        report.map_by_size[b] = mean_of(bucket_aps[b]);
    }
    report.scores = prf1(report.tp, report.fp, report.fn);
    return report;
}

namespace {

json opt(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

std::optional<double> opt_from(const json& v)
{
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
}

json prf1_json(const PRF1& s)
{
    return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

PRF1 prf1_from(const json& doc)
{
    return {doc.at("precision").get<double>(), doc.at("recall").get<double>(), doc.at("f1").get<double>()};
}

json by_size_json(const std::array<std::optional<double>, 3>& v)
{
    return {{"small", opt(v[0])}, {"medium", opt(v[1])}, {"large", opt(v[2])}};
}

std::array<std::optional<double>, 3> by_size_from(const json& doc)
{
    return {opt_from(doc.at("small")), opt_from(doc.at("medium")), opt_from(doc.at("large"))};
}

std::string pct(const std::optional<double>& v)
{
    return v ? fmt::format("{:.2f}", *v * 100.0) : std::string("-");
}

}  // namespace

json to_json(const EvalReport& report)
{
    json classes = json::array();
    for (const auto& c : report.classes) {
        classes.push_back({{"label", c.label},
                           {"gt_count", c.gt_count},
                           {"ap50", opt(c.ap50)},
                           {"ap", opt(c.ap)},
                           {"ar", opt(c.ar)},
                           {"ap_by_size", by_size_json(c.ap_by_size)},
                           {"tp", c.tp},
                           {"fp", c.fp},
                           {"fn", c.fn},
                           {"scores", prf1_json(c.scores)}});
    }
    return {{"classes", std::move(classes)},
            {"map50", opt(report.map50)},
            {"map", opt(report.map)},
            {"mar", opt(report.mar)},
            {"map_by_size", by_size_json(report.map_by_size)},
            {"tp", report.tp},
            {"fp", report.fp},
            {"fn", report.fn},
            {"scores", prf1_json(report.scores)},
            {"score_threshold", report.score_threshold},
            {"images", report.images},
            {"unmatched_images", report.unmatched_images}};
}

EvalReport report_from_json(const json& doc)
{
    EvalReport report;
    for (const auto& c : doc.at("classes")) {
        ClassMetrics cm;
        cm.label = c.at("label").get<std::string>();
        cm.gt_count = c.at("gt_count").get<std::size_t>();
        cm.ap50 = opt_from(c.at("ap50"));
        cm.ap = opt_from(c.at("ap"));
        cm.ar = opt_from(c.at("ar"));
        cm.ap_by_size = by_size_from(c.at("ap_by_size"));
        cm.tp = c.at("tp").get<std::size_t>();
        cm.fp = c.at("fp").get<std::size_t>();
        cm.fn = c.at("fn").get<std::size_t>();
        cm.scores = prf1_from(c.at("scores"));
        report.classes.push_back(std::move(cm));
    }
    report.map50 = opt_from(doc.at("map50"));
    report.map = opt_from(doc.at("map"));
    report.mar = opt_from(doc.at("mar"));
    report.map_by_size = by_size_from(doc.at("map_by_size"));
    report.tp = doc.at("tp").get<std::size_t>();
    report.fp = doc.at("fp").get<std::size_t>();
    report.fn = doc.at("fn").get<std::size_t>();
    report.scores = prf1_from(doc.at("scores"));
    report.score_threshold = doc.at("score_threshold").get<double>();
    report.images = doc.at("images").get<std::size_t>();
    report.unmatched_images = doc.at("unmatched_images").get<std::vector<std::string>>();
    return report;
}

std::string render_table(const EvalReport& report)
{
    std::size_t width = 7;
    for (const auto& c : report.classes) {
        width = std::max(width, c.label.size());
    }
    std::string out = fmt::format("{:<{}} {:>6} {:>8} {:>10} {:>10} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}\n",
                                  "Class", width, "GT", "mAP 0.5", "mAP .5-.95", "mAR .5-.95", "TP",
                                  "FP", "FN", "P", "R", "F1");
    const auto row = [&](const std::string& name, std::size_t gt, const std::optional<double>& ap50,
                         const std::optional<double>& ap, const std::optional<double>& ar,
                         std::size_t tp, std::size_t fp, std::size_t fn, const PRF1& s) {
        out += fmt::format("{:<{}} {:>6} {:>8} {:>10} {:>10} {:>6} {:>6} {:>6} {:>8.2f} {:>8.2f} {:>8.2f}\n",
                           name, width, gt, pct(ap50), pct(ap), pct(ar), tp, fp, fn,
                           s.precision * 100.0, s.recall * 100.0, s.f1 * 100.0);
    };
    std::size_t gt_total = 0;
    for (const auto& c : report.classes) {
        row(c.label, c.gt_count, c.ap50, c.ap, c.ar, c.tp, c.fp, c.fn, c.scores);
        gt_total += c.gt_count;
    }
    row("All", gt_total, report.map50, report.map, report.mar, report.tp, report.fp, report.fn,
        report.scores);
    out += fmt::format("mAP by size: small {} medium {} large {}\n", pct(report.map_by_size[0]),
                       pct(report.map_by_size[1]), pct(report.map_by_size[2]));
    return out;
}

std::string curves_csv(const EvalReport& report)
{
    std::string out = "label,iou_threshold,recall,precision\n";
    for (const auto& c : report.curves) {
        for (const auto& [r, p] : c.points) {
            out += fmt::format("\"{}\",{:.2f},{},{}\n", c.label, c.iou_threshold, r, p);
        }
    }
    return out;
}

ImageDetections detections_from_json(const json& doc)
{
    ImageDetections out;
    for (const auto& [image_id, dets] : doc.items()) {
        auto& list = out[image_id];
        for (const auto& d : dets) {
            const auto& b = d.at("bbox");
            list.push_back({d.at("label").get<std::string>(), d.at("score").get<double>(),
                            {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                             b.at(3).get<double>()}});
        }
    }
    return out;
}

json detections_to_json(const ImageDetections& dets)
{
    json out = json::object();
    for (const auto& [image_id, list] : dets) {
        json arr = json::array();
        for (const auto& d : list) {
            arr.push_back({{"label", d.label},
                           {"score", d.score},
                           {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}}});
        }
        out[image_id] = std::move(arr);
    }
    return out;
}

}  // namespace detdsci::eval
