#include "detdsci/geo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace detdsci::geo {

namespace {

// Reference correspondence between zoom level and spatial resolution,
// indexed from zoom 14.
constexpr std::array<double, 10> kTabulatedResolution = {
    6.2, 3.1, 1.55, 0.78, 0.39, 0.19, 0.10, 0.05, 0.02, 0.01};

void require_routed(ZoomLevel z)
{
    if (z.value() < kFirstRoutedZoom || z.value() > kLastRoutedZoom) {
        throw std::domain_error(
            fmt::format("zoom {} outside the routed range [{}, {}]", z.value(), kFirstRoutedZoom,
                        kLastRoutedZoom));
    }
}

// Fraction of a tile treated as lying on a tile boundary.
constexpr double kBoundarySnap = 1e-7;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace

ZoomLevel::ZoomLevel(int level) : level_(level)
{
    if (level < kMin || level > kMax) {
        throw std::domain_error(fmt::format("zoom level {} outside [{}, {}]", level, kMin, kMax));
    }
}

std::string_view to_string(ScaleInterval interval) noexcept
{
    return interval == ScaleInterval::Large ? "LARGE" : "SMALL";
}

ScaleInterval parse_scale_interval(std::string_view text)
{
    if (text == "LARGE") {
        return ScaleInterval::Large;
    }
    if (text == "SMALL") {
        return ScaleInterval::Small;
    }
    throw std::invalid_argument(fmt::format("unknown scale interval '{}'", text));
}

void validate(const GeoPoint& point)
{
    if (!std::isfinite(point.latitude) || std::abs(point.latitude) > kMaxLatitude) {
        throw std::domain_error(
            fmt::format("latitude {} outside the Web-Mercator range", point.latitude));
    }
    if (!std::isfinite(point.longitude) || point.longitude < -180.0 || point.longitude >= 180.0) {
        throw std::domain_error(fmt::format("longitude {} outside [-180, 180)", point.longitude));
    }
}

TileCoord::TileCoord(ZoomLevel z_, std::uint32_t x_, std::uint32_t y_) : z(z_), x(x_), y(y_)
{
    if (x >= z.tiles_per_axis() || y >= z.tiles_per_axis()) {
        throw std::domain_error(fmt::format("tile ({}, {}) outside the {}x{} grid of zoom {}", x, y,
                                            z.tiles_per_axis(), z.tiles_per_axis(), z.value()));
    }
}

SpatialResolution tabulated_resolution(ZoomLevel z)
{
    require_routed(z);
    return {kTabulatedResolution[static_cast<std::size_t>(z.value() - kFirstRoutedZoom)]};
}

SpatialResolution ground_resolution(double latitude_deg, ZoomLevel z)
{
    if (!std::isfinite(latitude_deg) || std::abs(latitude_deg) > kMaxLatitude) {
        throw std::domain_error(
            fmt::format("latitude {} outside the Web-Mercator range", latitude_deg));
    }
    const double circumference = 2.0 * std::numbers::pi * kEarthRadius;
    return {circumference * std::cos(deg_to_rad(latitude_deg)) / z.world_pixels()};
}

PixelPoint geo_to_pixel(const GeoPoint& point, ZoomLevel z)
{
    validate(point);
    const double lat = deg_to_rad(point.latitude);
    const double world = z.world_pixels();
    const double x = (point.longitude + 180.0) / 360.0 * world;
    const double y =
        (1.0 - std::log(std::tan(lat) + 1.0 / std::cos(lat)) / std::numbers::pi) / 2.0 * world;
    return {x, y};
}

GeoPoint pixel_to_geo(const PixelPoint& pixel, ZoomLevel z)
{
    const double world = z.world_pixels();
    const double lon = pixel.x / world * 360.0 - 180.0;
    const double n = std::numbers::pi * (1.0 - 2.0 * pixel.y / world);
    const double lat = rad_to_deg(std::atan(std::sinh(n)));
    return {lat, lon};
}

TileCoord geo_to_tile(const GeoPoint& point, ZoomLevel z)
{
    const PixelPoint px = geo_to_pixel(point, z);
    const auto last = static_cast<double>(z.tiles_per_axis() - 1);
    // A tile corner from tile_to_geo comes back a few ulps short of the
    // boundary after the trig round trip; snap such positions onto it.
    const auto index = [last](double pixel) {
        const double t = pixel / kTileSize;
        const double nearest = std::round(t);
        const double snapped = std::abs(t - nearest) < kBoundarySnap ? nearest : t;
        // The accepted latitude bound is slightly beyond the Mercator edge,
        // so clamp the index into the grid.
        return std::clamp(std::floor(snapped), 0.0, last);
    };
    const double tx = index(px.x);
    const double ty = index(px.y);
    return {z, static_cast<std::uint32_t>(tx), static_cast<std::uint32_t>(ty)};
}

GeoPoint tile_to_geo(const TileCoord& tile)
{
    return pixel_to_geo({static_cast<double>(tile.x) * kTileSize,
                         static_cast<double>(tile.y) * kTileSize},
                        tile.z);
}

ScaleInterval interval_for_zoom(ZoomLevel z)
{
    require_routed(z);
    return z.value() <= zoom_range(ScaleInterval::Large).second ? ScaleInterval::Large
                                                                : ScaleInterval::Small;
}

}  // namespace detdsci::geo
