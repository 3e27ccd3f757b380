#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "detdsci/eval.hpp"
#include "eval_cases.hpp"
#include "oracles.hpp"
#include "reference_values.hpp"

using namespace detdsci;
using namespace detdsci::eval;
namespace t = detdsci::testing;
using detect::Detection;
using dataset::AnnotatedImage;
using dataset::Instance;

namespace {

using t::iou_matrix;
using t::oracle_hits;
using t::oracle_iou;
using t::random_box;
using t::random_case;
using t::RandomCase;

}  // namespace

TEST(Iou, HandExamples)
{
    EXPECT_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
    EXPECT_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
    EXPECT_EQ(iou({0, 0, 10, 10}, {10, 0, 20, 10}), 0.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 50.0 / 150.0);
    EXPECT_THROW((void)iou({0, 0, 0, 10}, {0, 0, 1, 1}), std::domain_error);
    EXPECT_THROW((void)iou({0, 0, 1, 1}, {3, 3, 2, 4}), std::domain_error);
}

TEST(Iou, AgreesWithCellCountingOnRandomBoxes)
{
    std::mt19937 rng(12);
    for (int i = 0; i < 500; ++i) {
        const BBox a = random_box(rng, 12);
        const BBox b = random_box(rng, 12);
        ASSERT_NEAR(iou(a, b), oracle_iou(a, b), 1e-12);
        ASSERT_DOUBLE_EQ(iou(a, b), iou(b, a));
    }
}

TEST(Match, SingleAndDuplicateDetections)
{
    const std::vector<Instance> gt{{"plane", {0, 0, 10, 10}}};
    const std::vector<Detection> one{{"plane", 0.9, {0, 0, 10, 10}}};
    const auto m1 = match(one, gt, 0.5).per_class.at("plane");
    EXPECT_EQ(m1.tp, 1u);
    EXPECT_EQ(m1.fp, 0u);
    EXPECT_EQ(m1.fn, 0u);
    EXPECT_EQ(m1.pairs, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}}));

    const std::vector<Detection> two{{"plane", 0.9, {0, 0, 10, 10}}, {"plane", 0.8, {1, 0, 10, 10}}};
    const auto m2 = match(two, gt, 0.5).per_class.at("plane");
    EXPECT_EQ(m2.tp, 1u);
    EXPECT_EQ(m2.fp, 1u);
    EXPECT_EQ(m2.fn, 0u);
}

TEST(Match, ClassesNeverCrossMatch)
{
    const std::vector<Instance> gt{{"plane", {0, 0, 10, 10}}};
    const std::vector<Detection> dets{{"bridge", 0.9, {0, 0, 10, 10}}};
    const auto m = match(dets, gt, 0.5);
    EXPECT_EQ(m.per_class.at("plane").fn, 1u);
    EXPECT_EQ(m.per_class.at("bridge").fp, 1u);
    EXPECT_EQ(m.per_class.at("bridge").tp, 0u);
}

TEST(Match, TakesTheHighestIouCandidate)
{
    const std::vector<Instance> gt{{"plane", {0, 0, 10, 10}}, {"plane", {2, 0, 12, 10}}};
    const std::vector<Detection> dets{{"plane", 0.9, {2, 0, 12, 10}}, {"plane", 0.8, {0, 0, 10, 10}}};
    const auto m = match(dets, gt, 0.5).per_class.at("plane");
    EXPECT_EQ(m.tp, 2u);
    EXPECT_EQ(m.pairs, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}}));
}

TEST(Match, GreedyEqualsExhaustiveOnGreedyConsistentCases)
{
    // Consistent cases: every detection reaches at most one ground truth, so
    // the greedy order cannot steal a match another detection needed.
    std::mt19937 rng(4242);
    int checked = 0;
    for (int trial = 0; checked < 300 && trial < 20000; ++trial) {
        const RandomCase c = random_case(rng);
        const auto m = iou_matrix(c);
        const bool consistent = std::all_of(m.begin(), m.end(), [](const std::vector<double>& row) {
            return std::count_if(row.begin(), row.end(), [](double v) { return v >= 0.5; }) <= 1;
        });
        if (!consistent) {
            continue;
        }
        ++checked;
        const std::size_t best = t::exhaustive_max_matches(m, 0.5);
        const auto r = match(c.dets, c.gts, 0.5);
        const auto it = r.per_class.find("plane");
        const std::size_t tp = it == r.per_class.end() ? 0 : it->second.tp;
        const std::size_t fp = it == r.per_class.end() ? 0 : it->second.fp;
        const std::size_t fn = it == r.per_class.end() ? 0 : it->second.fn;
        ASSERT_EQ(tp, best) << "trial " << trial;
        ASSERT_EQ(fp, c.dets.size() - best);
        ASSERT_EQ(fn, c.gts.size() - best);
    }
    EXPECT_GE(checked, 200);
}

TEST(Match, TpPlusFnIsGroundTruthCountAtEveryThreshold)
{
    std::mt19937 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const RandomCase c = random_case(rng);
        for (const double thr : kIouThresholds) {
            const auto r = match(c.dets, c.gts, thr);
            if (const auto it = r.per_class.find("plane"); it != r.per_class.end()) {
                ASSERT_EQ(it->second.tp + it->second.fn, c.gts.size());
                ASSERT_EQ(it->second.tp + it->second.fp, c.dets.size());
                std::set<std::size_t> gts_used;
                for (const auto& [d, g] : it->second.pairs) {
                    ASSERT_TRUE(gts_used.insert(g).second);
                    ASSERT_GE(iou(c.dets[d].bbox, c.gts[g].bbox), thr);
                }
            }
        }
    }
}

TEST(Prf1, ReproducesEveryReferenceTriple)
{
    for (const auto* table : {&t::kComparison, &t::kSubstationSteps, &t::kUrbanContext}) {
        for (const auto& row : *table) {
            const PRF1 s = prf1(row.tp, row.fp, row.fn);
            EXPECT_NEAR(s.f1 * 100.0, row.f1_pct, 0.01) << row.model;
            if (row.precision_pct >= 0) {
                EXPECT_NEAR(s.precision * 100.0, row.precision_pct, 0.01) << row.model;
                EXPECT_NEAR(s.recall * 100.0, row.recall_pct, 0.01) << row.model;
            }
        }
    }
}

TEST(Prf1, EmptyCaseAndScaleFreedom)
{
    const PRF1 zero = prf1(0, 0, 0);
    EXPECT_EQ(zero.precision, 0.0);
    EXPECT_EQ(zero.recall, 0.0);
    EXPECT_EQ(zero.f1, 0.0);
    EXPECT_EQ(prf1(0, 5, 0).f1, 0.0);
    std::mt19937 rng(2);
    for (int i = 0; i < 200; ++i) {
        const std::size_t tp = rng() % 500;
        const std::size_t fp = rng() % 500;
        const std::size_t fn = rng() % 500;
        const std::size_t k = 1 + rng() % 50;
        const PRF1 a = prf1(tp, fp, fn);
        const PRF1 b = prf1(tp * k, fp * k, fn * k);
        ASSERT_NEAR(a.precision, b.precision, 1e-12);
        ASSERT_NEAR(a.recall, b.recall, 1e-12);
        ASSERT_NEAR(a.f1, b.f1, 1e-12);
        if (a.precision + a.recall > 0) {
            ASSERT_NEAR(a.f1, 2 * a.precision * a.recall / (a.precision + a.recall), 1e-12);
        }
    }
}

TEST(AveragePrecision, PerfectAndEmptyDetectors)
{
    EXPECT_DOUBLE_EQ(average_precision(make_curve("a", 0.5, 3, {true, true, true})), 1.0);
    EXPECT_DOUBLE_EQ(average_precision(make_curve("a", 0.5, 3, {true, true, true, false})), 1.0);
    EXPECT_EQ(average_precision(make_curve("a", 0.5, 3, {})), 0.0);
    EXPECT_EQ(average_precision(make_curve("a", 0.5, 3, {false, false})), 0.0);
}

TEST(AveragePrecision, FiveDetectionHandExample)
{
    // Recall 1/3 at precision 1, then 2/3 at 2/3: 34 samples at 1 (r <= 0.33)
    // and 33 at 2/3 (0.34 <= r <= 0.66).
    const auto curve = make_curve("a", 0.5, 3, {true, false, true, false, false});
    EXPECT_NEAR(average_precision(curve), 56.0 / 101.0, 1e-12);
    EXPECT_NEAR(average_precision(curve), t::envelope_ap({true, false, true, false, false}, 3), 1e-12);
}

TEST(AveragePrecision, MatchesEnvelopeOracleOnRandomHitSequences)
{
    std::mt19937 rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = rng() % 12;
        std::vector<bool> hits;
        std::size_t tp = 0;
        for (std::size_t i = 0; i < n; ++i) {
            hits.push_back(rng() % 2 == 0);
            tp += hits.back() ? 1 : 0;
        }
        const std::size_t gt = tp + rng() % 4 + (tp == 0 ? 1 : 0);
        const auto curve = make_curve("a", 0.5, gt, hits);
        ASSERT_NEAR(average_precision(curve), t::envelope_ap(hits, gt), 1e-9) << trial;
        for (std::size_t s = 1; s < kRecallSamples; ++s) {
            ASSERT_LE(curve.interpolated[s], curve.interpolated[s - 1]);
        }
    }
}

TEST(AveragePrecision, EvaluateMatchesOracleOnRandomSmallInstances)
{
    std::mt19937 rng(2025);
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const RandomCase c = random_case(rng);
        if (c.gts.empty()) {
            continue;
        }
        const std::vector<AnnotatedImage> gt{{"img", geo::ZoomLevel(18), c.gts, dataset::Source::GoogleMaps}};
        const ImageDetections dets{{"img", c.dets}};
        const EvalReport report = evaluate(gt, dets);
        ASSERT_EQ(report.classes.size(), 1u);
        const ClassMetrics& cm = report.classes[0];
        ASSERT_NEAR(*cm.ap50, t::envelope_ap(oracle_hits(c, 0.5), c.gts.size()), 1e-9) << trial;
        double mean = 0.0;
        double recall = 0.0;
        for (const double thr : kIouThresholds) {
            const auto hits = oracle_hits(c, thr);
            mean += t::envelope_ap(hits, c.gts.size());
            recall += static_cast<double>(std::count(hits.begin(), hits.end(), true)) /
                      static_cast<double>(c.gts.size());
        }
        ASSERT_NEAR(*cm.ap, mean / 10.0, 1e-9) << trial;
        ASSERT_NEAR(*cm.ar, recall / 10.0, 1e-9) << trial;
        ++checked;
    }
    EXPECT_GE(checked, 200);
}

TEST(AveragePrecision, InvariantUnderPermutingEqualScores)
{
    std::vector<Detection> dets{{"plane", 0.5, {0, 0, 10, 10}},
                                {"plane", 0.5, {30, 30, 40, 40}},
                                {"plane", 0.5, {50, 0, 60, 10}},
                                {"plane", 0.9, {70, 0, 80, 10}}};
    const std::vector<AnnotatedImage> gt{
        {"img", geo::ZoomLevel(18), {{"plane", {0, 0, 10, 10}}, {"plane", {70, 0, 80, 10}}}, {}}};
    const double reference = *evaluate(gt, {{"img", dets}}).classes[0].ap;
    std::sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) { return a.bbox < b.bbox; });
    do {
        ASSERT_EQ(*evaluate(gt, {{"img", dets}}).classes[0].ap, reference);
    } while (std::next_permutation(dets.begin(), dets.end(),
                                   [](const auto& a, const auto& b) { return a.bbox < b.bbox; }));
}

TEST(AverageRecall, DiscreteMean)
{
    const std::vector<double> ones(10, 1.0);
    const std::vector<double> zeros(10, 0.0);
    const std::vector<double> half{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    EXPECT_EQ(average_recall(ones), 1.0);
    EXPECT_EQ(average_recall(zeros), 0.0);
    EXPECT_EQ(average_recall(half), 0.5);
}

TEST(SizeBucket, CocoAreaRanges)
{
    EXPECT_EQ(size_bucket({0, 0, 10, 10}), SizeBucket::Small);
    EXPECT_EQ(size_bucket({0, 0, 50, 50}), SizeBucket::Medium);
    EXPECT_EQ(size_bucket({0, 0, 100, 100}), SizeBucket::Large);
    EXPECT_EQ(size_bucket({0, 0, 32, 32}), SizeBucket::Medium);
    EXPECT_EQ(size_bucket({0, 0, 96, 96}), SizeBucket::Large);
}

TEST(Evaluate, PerfectDetectorScoresOneEverywhere)
{
    const std::vector<AnnotatedImage> gt{
        {"a", geo::ZoomLevel(18), {{"plane", {0, 0, 10, 10}}, {"bridge", {100, 100, 200, 200}}}, {}},
        {"b", geo::ZoomLevel(19), {{"plane", {0, 0, 50, 50}}}, {}}};
    const ImageDetections dets{
        {"a", {{"plane", 0.9, {0, 0, 10, 10}}, {"bridge", 0.8, {100, 100, 200, 200}}}},
        {"b", {{"plane", 0.7, {0, 0, 50, 50}}}}};
    const EvalReport r = evaluate(gt, dets);
    EXPECT_EQ(*r.map50, 1.0);
    EXPECT_EQ(*r.map, 1.0);
    EXPECT_EQ(*r.mar, 1.0);
    EXPECT_EQ(*r.map_by_size[0], 1.0);
    EXPECT_EQ(*r.map_by_size[1], 1.0);
    EXPECT_EQ(*r.map_by_size[2], 1.0);
    EXPECT_EQ(r.tp, 3u);
    EXPECT_EQ(r.fp, 0u);
    EXPECT_EQ(r.fn, 0u);
    EXPECT_EQ(r.scores.f1, 1.0);
}

TEST(Evaluate, ClassAbsentFromGroundTruthIsExcludedFromMeans)
{
    const std::vector<AnnotatedImage> gt{{"a", geo::ZoomLevel(18), {{"plane", {0, 0, 10, 10}}}, {}}};
    const ImageDetections dets{{"a", {{"plane", 0.9, {0, 0, 10, 10}}, {"ship", 0.9, {20, 20, 30, 30}}}},
                               {"unknown", {{"plane", 0.9, {0, 0, 10, 10}}}}};
    const EvalReport r = evaluate(gt, dets);
    EXPECT_EQ(*r.map, 1.0);
    const auto ship = std::find_if(r.classes.begin(), r.classes.end(), [](const auto& c) { return c.label == "ship"; });
    ASSERT_NE(ship, r.classes.end());
    EXPECT_FALSE(ship->ap.has_value());
    EXPECT_EQ(ship->fp, 1u);
    EXPECT_EQ(r.unmatched_images, std::vector<std::string>{"unknown"});
    EXPECT_FALSE(evaluate({}, {}).map.has_value());
}

TEST(Evaluate, CapsDetectionsPerImageAtOneHundred)
{
    std::vector<Detection> dets;
    for (int i = 0; i < 120; ++i) {
        dets.push_back({"plane", 0.99 - i * 0.001, {double(i * 20), 500, double(i * 20 + 10), 510}});
    }
    dets.push_back({"plane", 0.001, {0, 0, 10, 10}});
    const std::vector<AnnotatedImage> gt{{"a", geo::ZoomLevel(18), {{"plane", {0, 0, 10, 10}}}, {}}};
    const EvalReport r = evaluate(gt, {{"a", dets}});
    EXPECT_EQ(*r.mar, 0.0);
    EXPECT_EQ(r.fp, 100u);
    EXPECT_EQ(r.fn, 1u);
}

TEST(Evaluate, ScoreThresholdOnlyAffectsCounts)
{
    const std::vector<AnnotatedImage> gt{
        {"a", geo::ZoomLevel(18), {{"plane", {0, 0, 10, 10}}, {"plane", {50, 50, 60, 60}}}, {}}};
    const ImageDetections dets{{"a", {{"plane", 0.9, {0, 0, 10, 10}}, {"plane", 0.2, {50, 50, 60, 60}}}}};
    EvalOptions options;
    options.score_threshold = 0.5;
    const EvalReport r = evaluate(gt, dets, options);
    EXPECT_EQ(r.tp, 1u);
    EXPECT_EQ(r.fn, 1u);
    EXPECT_EQ(*r.map50, 1.0);
}

TEST(Evaluate, JsonRoundTripAndRendering)
{
    std::mt19937 rng(5);
    std::vector<AnnotatedImage> gt;
    ImageDetections dets;
    for (int i = 0; i < 10; ++i) {
        const RandomCase c = random_case(rng);
        const std::string id = "img" + std::to_string(i);
        gt.push_back({id, geo::ZoomLevel(20), c.gts, {}});
        dets[id] = c.dets;
    }
    gt.push_back({"z", geo::ZoomLevel(20), {{"bridge", {0, 0, 40, 40}}}, {}});
    const EvalReport r = evaluate(gt, dets);
    EXPECT_EQ(to_json(report_from_json(to_json(r))), to_json(r));
    EXPECT_EQ(detections_from_json(detections_to_json(dets)), dets);
    const std::string table = render_table(r);
    EXPECT_NE(table.find("plane"), std::string::npos);
    EXPECT_NE(table.find("bridge"), std::string::npos);
    const std::string csv = curves_csv(r);
    EXPECT_EQ(csv.rfind("label,iou_threshold,recall,precision", 0), 0u);
}
