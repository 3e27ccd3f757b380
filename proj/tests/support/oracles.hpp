#pragma once

// Independent reference implementations. They share no code with the library
// and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <set>
#include <utility>
#include <vector>

namespace detdsci::testing {

/// Slippy-map tile of a point, written from the asinh form of the Mercator
/// y coordinate.
inline std::pair<long, long> slippy_tile(double lat_deg, double lon_deg, int zoom)
{
    const double n = std::ldexp(1.0, zoom);
    const double lat = lat_deg * std::numbers::pi / 180.0;
    const long x = static_cast<long>(std::floor((lon_deg + 180.0) / 360.0 * n));
    const long y = static_cast<long>(std::floor((1.0 - std::asinh(std::tan(lat)) / std::numbers::pi) / 2.0 * n));
    return {x, y};
}

/// Window offsets along one axis by scanning every candidate position.
inline std::vector<int> brute_force_offsets(int extent, int stride, int window)
{
    if (extent <= window) {
        return {0};
    }
    std::set<int> out;
    for (int o = 0; o + window <= extent; ++o) {
        if (o % stride == 0 || o + window == extent) {
            out.insert(o);
        }
    }
    return {out.begin(), out.end()};
}

/// IoU of integer-valued boxes (x0, y0, x1, y1) by counting unit cells.
inline double cell_iou(int ax0, int ay0, int ax1, int ay1, int bx0, int by0, int bx1, int by1)
{
    long inter = 0;
    long uni = 0;
    const int lo_x = std::min(ax0, bx0);
    const int hi_x = std::max(ax1, bx1);
    const int lo_y = std::min(ay0, by0);
    const int hi_y = std::max(ay1, by1);
    for (int y = lo_y; y < hi_y; ++y) {
        for (int x = lo_x; x < hi_x; ++x) {
            const bool in_a = x >= ax0 && x < ax1 && y >= ay0 && y < ay1;
            const bool in_b = x >= bx0 && x < bx1 && y >= by0 && y < by1;
            inter += (in_a && in_b) ? 1 : 0;
            uni += (in_a || in_b) ? 1 : 0;
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Area under the monotone precision envelope sampled at 101 recall points:
/// for each sample r, the best precision among all PR points whose recall
/// reaches r. `hits` lists detections in score order.
inline double envelope_ap(const std::vector<bool>& hits, std::size_t gt_count)
{
    if (gt_count == 0) {
        return 0.0;
    }
    std::vector<std::pair<double, double>> points;  // (recall, precision)
    std::size_t tp = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        tp += hits[i] ? 1 : 0;
        points.emplace_back(static_cast<double>(tp) / static_cast<double>(gt_count),
                            static_cast<double>(tp) / static_cast<double>(i + 1));
    }
    double sum = 0.0;
    for (int s = 0; s <= 100; ++s) {
        const double r = s == 100 ? 1.0 : s * 0.01;
        double best = 0.0;
        for (const auto& [recall, precision] : points) {
            if (recall >= r) {
                best = std::max(best, precision);
            }
        }
        sum += best;
    }
    return sum / 101.0;
}

/// Largest number of (detection, ground truth) pairs with IoU >= threshold
/// under a one-to-one assignment, by trying every assignment.
inline std::size_t exhaustive_max_matches(const std::vector<std::vector<double>>& iou, double threshold)
{
    const std::size_t dets = iou.size();
    const std::size_t gts = dets == 0 ? 0 : iou.front().size();
    std::vector<bool> used(gts, false);
    std::size_t best = 0;
    auto recurse = [&](auto&& self, std::size_t d, std::size_t count) -> void {
        if (d == dets) {
            best = std::max(best, count);
            return;
        }
        self(self, d + 1, count);
        for (std::size_t g = 0; g < gts; ++g) {
            if (!used[g] && iou[d][g] >= threshold) {
                used[g] = true;
                self(self, d + 1, count + 1);
                used[g] = false;
            }
        }
    };
    recurse(recurse, 0, 0);
    return best;
}

}  // namespace detdsci::testing
