#pragma once

// Small random matching problems with a greedy reference written against the
// cell-counting IoU oracle.

#include <algorithm>
#include <random>
#include <vector>

#include "detdsci/dataset.hpp"
#include "detdsci/detect.hpp"
#include "oracles.hpp"

namespace detdsci::testing {

struct RandomCase {
    std::vector<detect::Detection> dets;  // distinct scores, descending
    std::vector<dataset::Instance> gts;
};

inline BBox random_box(std::mt19937& rng, int grid)
{
    const int x = static_cast<int>(rng() % static_cast<unsigned>(grid));
    const int y = static_cast<int>(rng() % static_cast<unsigned>(grid));
    const int w = 2 + static_cast<int>(rng() % 8);
    const int h = 2 + static_cast<int>(rng() % 8);
    return {double(x), double(y), double(x + w), double(y + h)};
}

/// Up to 6 detections and 4 ground-truth boxes of one class; detections are
/// jittered copies of ground truth or free boxes.
inline RandomCase random_case(std::mt19937& rng)
{
    RandomCase c;
    const int n_gt = static_cast<int>(rng() % 5);
    const int n_det = static_cast<int>(rng() % 7);
    for (int i = 0; i < n_gt; ++i) {
        c.gts.push_back({"plane", random_box(rng, 16)});
    }
    std::vector<double> scores;
    for (int i = 0; i < n_det; ++i) {
        scores.push_back(static_cast<double>(i + 1) / 10.0);
    }
    std::shuffle(scores.begin(), scores.end(), rng);
    for (int i = 0; i < n_det; ++i) {
        BBox b = random_box(rng, 16);
        if (!c.gts.empty() && rng() % 3 != 0) {
            b = c.gts[rng() % c.gts.size()].bbox;
            const double dx = static_cast<int>(rng() % 3) - 1;
            const double dy = static_cast<int>(rng() % 3) - 1;
            b = {b.x_min + dx, b.y_min + dy, b.x_max + dx + static_cast<int>(rng() % 2), b.y_max + dy};
        }
        c.dets.push_back({"plane", scores[static_cast<std::size_t>(i)], b});
    }
    std::sort(c.dets.begin(), c.dets.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    return c;
}

inline double oracle_iou(const BBox& a, const BBox& b)
{
    return cell_iou(int(a.x_min), int(a.y_min), int(a.x_max), int(a.y_max), int(b.x_min), int(b.y_min),
                       int(b.x_max), int(b.y_max));
}

inline std::vector<std::vector<double>> iou_matrix(const RandomCase& c)
{
    std::vector<std::vector<double>> m(c.dets.size(), std::vector<double>(c.gts.size()));
    for (std::size_t d = 0; d < c.dets.size(); ++d) {
        for (std::size_t g = 0; g < c.gts.size(); ++g) {
            m[d][g] = oracle_iou(c.dets[d].bbox, c.gts[g].bbox);
        }
    }
    return m;
}

/// Hits of a score-ordered greedy assignment written against the cell oracle.
inline std::vector<bool> oracle_hits(const RandomCase& c, double thr)
{
    const auto m = iou_matrix(c);
    std::vector<bool> used(c.gts.size(), false);
    std::vector<bool> hits;
    for (std::size_t d = 0; d < c.dets.size(); ++d) {
        double best = -1.0;
        std::size_t pick = c.gts.size();
        for (std::size_t g = 0; g < c.gts.size(); ++g) {
            if (!used[g] && m[d][g] >= thr && m[d][g] > best) {
                best = m[d][g];
                pick = g;
            }
        }
        if (pick < c.gts.size()) {
            used[pick] = true;
        }
        hits.push_back(pick < c.gts.size());
    }
    return hits;
}

}  // namespace detdsci::testing
