#pragma once

#include <compare>
#include <cstdint>
#include <string_view>
#include <utility>

namespace detdsci::geo {

inline constexpr int kTileSize = 256;
inline constexpr double kEarthRadius = 6378137.0;

/// Largest |latitude| accepted as input (Web-Mercator limit, rounded).
inline constexpr double kMaxLatitude = 85.05113;

/// Exact latitude of the Web-Mercator square's north edge.
inline constexpr double kMercatorEdgeLatitude = 85.0511287798066;

/// Slippy-map zoom level in [0, 23].
class ZoomLevel {
public:
    static constexpr int kMin = 0;
    static constexpr int kMax = 23;

    /// Throws std::domain_error outside [0, 23].
    explicit ZoomLevel(int level);

    [[nodiscard]] constexpr int value() const noexcept { return level_; }

    /// Number of tiles along one axis, 2^z.
    [[nodiscard]] constexpr std::uint32_t tiles_per_axis() const noexcept
    {
        return std::uint32_t{1} << level_;
    }

    /// World size in pixels along one axis, 256 * 2^z.
    [[nodiscard]] constexpr double world_pixels() const noexcept
    {
        return static_cast<double>(kTileSize) * static_cast<double>(tiles_per_axis());
    }

    friend constexpr auto operator<=>(const ZoomLevel&, const ZoomLevel&) = default;

private:
    int level_;
};

/// The two zoom intervals used for routing: LARGE = [14,17], SMALL = [18,23].
enum class ScaleInterval { Large, Small };

inline constexpr int kFirstRoutedZoom = 14;
inline constexpr int kLastRoutedZoom = 23;

[[nodiscard]] std::string_view to_string(ScaleInterval interval) noexcept;

/// Parses "LARGE" / "SMALL" (case-sensitive). Throws std::invalid_argument.
[[nodiscard]] ScaleInterval parse_scale_interval(std::string_view text);

/// Inclusive zoom range covered by an interval.
[[nodiscard]] constexpr std::pair<int, int> zoom_range(ScaleInterval interval) noexcept
{
    return interval == ScaleInterval::Large ? std::pair{14, 17} : std::pair{18, 23};
}

struct GeoPoint {
    double latitude = 0.0;
    double longitude = 0.0;

    friend constexpr bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Throws std::domain_error when |lat| > 85.05113 or lon outside [-180, 180).
void validate(const GeoPoint& point);

struct SpatialResolution {
    double meters_per_pixel = 0.0;
};

struct TileCoord {
    /// Throws std::domain_error unless x, y < 2^z.
    TileCoord(ZoomLevel z, std::uint32_t x, std::uint32_t y);

    ZoomLevel z;
    std::uint32_t x;
    std::uint32_t y;

    friend constexpr auto operator<=>(const TileCoord&, const TileCoord&) = default;
};

/// Position in the global pixel frame of a zoom level (origin at the NW
/// corner of tile (0, 0), y growing south).
struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Tabulated resolution of the routed zoom levels (14..23), in meters/pixel.
/// These are the tabulated reference values and are not latitude-aware;
/// use ground_resolution() for real imagery.
[[nodiscard]] SpatialResolution tabulated_resolution(ZoomLevel z);

/// Web-Mercator ground resolution 2*pi*R*cos(lat) / (256 * 2^z).
[[nodiscard]] SpatialResolution ground_resolution(double latitude_deg, ZoomLevel z);

[[nodiscard]] TileCoord geo_to_tile(const GeoPoint& point, ZoomLevel z);

/// North-west corner of the tile.
[[nodiscard]] GeoPoint tile_to_geo(const TileCoord& tile);

[[nodiscard]] ScaleInterval interval_for_zoom(ZoomLevel z);

[[nodiscard]] PixelPoint geo_to_pixel(const GeoPoint& point, ZoomLevel z);

/// Inverse of geo_to_pixel. Accepts the closed world square [0, 256*2^z].
[[nodiscard]] GeoPoint pixel_to_geo(const PixelPoint& pixel, ZoomLevel z);

}  // namespace detdsci::geo
