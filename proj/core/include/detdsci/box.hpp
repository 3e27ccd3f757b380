#pragma once

#include <algorithm>
#include <compare>

namespace detdsci {

/// Horizontal bounding box in pixel coordinates, half-open on neither side:
/// width is x_max - x_min (no +1 convention).
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    [[nodiscard]] constexpr double width() const noexcept { return x_max - x_min; }
    [[nodiscard]] constexpr double height() const noexcept { return y_max - y_min; }
    [[nodiscard]] constexpr double area() const noexcept { return width() * height(); }
    [[nodiscard]] constexpr bool valid() const noexcept { return x_min < x_max && y_min < y_max; }

    [[nodiscard]] constexpr BBox translated(double dx, double dy) const noexcept
    {
        return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
    }

    friend constexpr bool operator==(const BBox&, const BBox&) = default;
    friend constexpr auto operator<=>(const BBox&, const BBox&) = default;
};

/// Area of the overlap of two boxes, 0 when disjoint.
[[nodiscard]] constexpr double intersection_area(const BBox& a, const BBox& b) noexcept
{
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace detdsci
