#pragma once

// Reference figures used as fixtures, copied verbatim. Nothing here is
// computed.

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace detdsci::testing {

/// Zoom level -> reference resolution (m/pixel).
inline const std::vector<std::pair<int, double>> kZoomResolution{
    {14, 6.2}, {15, 3.1}, {16, 1.55}, {17, 0.78}, {18, 0.39},
    {19, 0.19}, {20, 0.10}, {21, 0.05}, {22, 0.02}, {23, 0.01},
};

struct Triple {
    const char* model;
    std::size_t tp, fp, fn;
    double precision_pct, recall_pct, f1_pct;
};

/// Four-way comparison on the target classes. Precision and recall are -1
/// where only F1 is given.
inline const std::vector<Triple> kComparison{
    {"Base_Det", 70, 35, 44, -1, -1, 63.93},
    {"CI-LS_Det_stable", 27, 3, 88, -1, -1, 37.24},
    {"CI-SS_Det_stable", 71, 32, 44, -1, -1, 65.14},
    {"DetDSCI", 83, 24, 32, 77.57, 72.17, 74.77},
};
inline constexpr double kHeadlineDeltaPp = 37.53;

/// Small-scale detector evolution on the substation test set (-1 as above).
inline const std::vector<Triple> kSubstationSteps{
    {"CI-SS_Det_alpha", 117, 449, 7, 20.67, 94.35, 33.91},
    {"CI-SS_Det_beta", 75, 124, 49, -1, -1, 46.44},
    {"CI-SS_Det_stable", 112, 62, 12, 64.37, 90.32, 75.17},
};

/// Small-scale detector on the urban-context test set.
inline const std::vector<Triple> kUrbanContext{
    {"CI-SS_Det_alpha", 29, 19, 1184, 60.42, 2.39, 4.60},
    {"CI-SS_Det_beta", 236, 35, 977, 87.08, 19.46, 31.81},
    {"CI-SS_Det_stable", 334, 39, 879, 89.54, 27.54, 42.12},
};

/// Two-way zoom classifier, rows = true {LARGE, SMALL}.
inline const std::vector<std::vector<std::size_t>> kTwoWayConfusion{{134, 8}, {28, 966}};
inline constexpr double kTwoWayAccuracyPct = 96.83;

/// Ten-way zoom classifier, rows = true zoom 14..23.
inline const std::vector<std::vector<std::size_t>> kTenWayConfusion{
    {0, 13, 5, 0, 0, 0, 0, 0, 1, 0},     {0, 14, 34, 2, 0, 0, 0, 2, 0, 0},
    {0, 0, 25, 26, 0, 0, 1, 0, 0, 0},    {0, 0, 1, 18, 0, 0, 0, 0, 0, 0},
    {0, 0, 0, 33, 0, 8, 2, 0, 1, 0},     {1, 0, 0, 9, 0, 209, 69, 12, 4, 0},
    {0, 0, 0, 0, 0, 12, 224, 57, 11, 0}, {0, 0, 0, 2, 0, 1, 6, 268, 25, 2},
    {0, 0, 0, 0, 0, 0, 0, 2, 17, 0},     {0, 0, 0, 0, 0, 0, 0, 1, 18, 0},
};
/// Reference accuracy; the reference diagonal sums to 775/1136 = 68.22%.
inline constexpr double kTenWayReferenceAccuracyPct = 68.31;

/// Electrical substation instances per zoom, small-scale alpha training set.
inline const std::vector<std::pair<int, std::size_t>> kSubstationAlphaTrain{
    {18, 103}, {19, 103}, {20, 103}, {21, 103}, {22, 103}, {23, 103}};
inline constexpr std::size_t kSubstationAlphaTrainTotal = 618;
inline const std::vector<std::pair<int, std::size_t>> kSubstationAlphaTest{{19, 27}, {20, 27}, {21, 27}};
inline constexpr std::size_t kSubstationAlphaTestTotal = 81;

/// Airport instances per zoom, large-scale alpha sets.
inline const std::vector<std::pair<int, std::size_t>> kAirportAlphaTrain{
    {14, 60}, {15, 69}, {16, 251}, {17, 124}};
inline constexpr std::size_t kAirportAlphaTrainTotal = 504;
inline const std::vector<std::pair<int, std::size_t>> kAirportAlphaTest{{15, 17}, {16, 16}};
inline constexpr std::size_t kAirportAlphaTestTotal = 33;

/// Small-scale beta training set: per class, counts at zoom 18..23, the
/// DOTA count (-1 where the class does not come from DOTA) and the total.
struct ClassRow {
    const char* label;
    std::array<std::size_t, 6> by_zoom;
    long external;
    std::size_t total;
};

inline const std::vector<ClassRow> kSmallBetaTrain{
    {"electrical substation", {103, 103, 103, 103, 103, 103}, -1, 618},
    {"large vehicle", {0, 3, 26, 5, 3, 0}, 16923, 16960},
    {"swimming pool", {111, 104, 62, 11, 2, 0}, 1732, 2022},
    {"helicopter", {0, 0, 0, 0, 0, 0}, 630, 630},
    {"bridge", {19, 18, 5, 0, 0, 0}, 2041, 2083},
    {"plane", {0, 0, 0, 0, 0, 0}, 7944, 7944},
    {"ship", {0, 0, 0, 0, 0, 0}, 28033, 28033},
    {"soccer ball field", {4, 4, 1, 0, 0, 0}, 311, 320},
    {"basketball court", {0, 0, 0, 0, 0, 0}, 509, 509},
    {"ground track field", {0, 0, 0, 0, 0, 0}, 307, 307},
    {"small vehicle", {0, 0, 141, 234, 68, 5}, 26099, 26547},
    {"harbour", {0, 0, 0, 0, 1, 0}, 5937, 5938},
    {"baseball diamond", {0, 0, 0, 0, 0, 0}, 412, 412},
    {"tennis court", {6, 6, 1, 0, 0, 0}, 2325, 2338},
    {"roundabout", {25, 26, 13, 1, 0, 0}, 385, 450},
    {"storage tank", {23, 39, 36, 12, 0, 0}, 5024, 5134},
};

/// Canonical label -> DOTA v1.0 label for the imported classes.
inline const std::vector<std::pair<std::string, std::string>> kDotaNames{
    {"large vehicle", "large-vehicle"},   {"swimming pool", "swimming-pool"},
    {"helicopter", "helicopter"},         {"bridge", "bridge"},
    {"plane", "plane"},                   {"ship", "ship"},
    {"soccer ball field", "soccer-ball-field"}, {"basketball court", "basketball-court"},
    {"ground track field", "ground-track-field"}, {"small vehicle", "small-vehicle"},
    {"harbour", "harbor"},                {"baseball diamond", "baseball-diamond"},
    {"tennis court", "tennis-court"},     {"roundabout", "roundabout"},
    {"storage tank", "storage-tank"},
};

/// Large-scale beta training set: columns airport, train station, motorway,
/// bridge, industrial area, harbour; rows zoom 14..17, then DIOR (-1 where
/// the class is not imported), then totals.
inline const std::vector<const char*> kLargeBetaClasses{
    "airport", "train station", "motorway", "bridge", "industrial area", "harbour"};
inline const std::vector<std::pair<int, std::array<std::size_t, 6>>> kLargeBetaTrain{
    {14, {60, 1, 566, 1, 11, 1}},
    {15, {69, 2, 819, 1, 14, 1}},
    {16, {251, 2, 3207, 8, 34, 1}},
    {17, {124, 19, 2859, 4, 50, 1}},
};
inline constexpr std::array<long, 6> kLargeBetaDior{1327, 1011, -1, 3967, -1, 5509};
inline constexpr std::array<std::size_t, 6> kLargeBetaTotals{1831, 1035, 7451, 3981, 109, 5513};

/// Canonical label -> DIOR label.
inline const std::vector<std::pair<std::string, std::string>> kDiorNames{
    {"airport", "airport"}, {"train station", "trainstation"}, {"bridge", "bridge"}, {"harbour", "harbor"}};

}  // namespace detdsci::testing
