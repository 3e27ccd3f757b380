#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detdsci/errors.hpp"
#include "detdsci/geo.hpp"
#include "detdsci/http.hpp"
#include "detdsci/raster.hpp"

namespace detdsci::ingest {

/// Detector input edge length in pixels.
inline constexpr int kCropSize = 2000;

struct RetryPolicy {
    int max_attempts = 3;
    /// Delay before retry k (1-based) is backoff_base * 2^(k-1).
    std::chrono::milliseconds backoff_base{250};
};

/// Templated XYZ tile endpoint. The template must contain each of {z}, {x}
/// and {y} exactly once; an optional {key} is replaced with the value of the
/// environment variable named by api_key_ref.
struct TileSource {
    std::string url_template;
    std::string api_key_ref;
    /// Requests per second shared by all fetch threads; <= 0 disables limiting.
    double rate_limit = 8.0;
    RetryPolicy retry;

    /// Throws ConfigError when the template or policy is malformed.
    void validate() const;

    /// Expanded URL. Contains credentials when {key} is used: never log it.
    [[nodiscard]] std::string url_for(const geo::TileCoord& tile) const;
};

class FetchError : public Error {
public:
    FetchError(const geo::TileCoord& tile, const std::string& what);
    [[nodiscard]] const geo::TileCoord& tile() const noexcept { return tile_; }

private:
    geo::TileCoord tile_;
};

class AssemblyError : public Error {
public:
    AssemblyError(const std::string& what, std::vector<geo::TileCoord> holes);
    [[nodiscard]] const std::vector<geo::TileCoord>& holes() const noexcept { return holes_; }

private:
    std::vector<geo::TileCoord> holes_;
};

/// Token spacing limiter: successive acquire() calls, from any thread, are
/// released at least 1/rate seconds apart.
class RateLimiter {
public:
    explicit RateLimiter(double per_second);
    void acquire();

private:
    std::mutex mutex_;
    std::chrono::steady_clock::duration interval_{};
    std::chrono::steady_clock::time_point next_{};
};

/// On-disk tile cache laid out as {root}/{z}/{x}/{y}.png. Stores the bytes
/// exactly as downloaded, whatever their encoding.
class TileCache {
public:
    explicit TileCache(std::filesystem::path root);

    [[nodiscard]] std::filesystem::path path_for(const geo::TileCoord& tile) const;
    [[nodiscard]] std::optional<std::vector<std::uint8_t>> load(const geo::TileCoord& tile) const;
    void store(const geo::TileCoord& tile, std::span<const std::uint8_t> bytes) const;
    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

struct FetchStats {
    std::size_t network_requests = 0;
    std::size_t cache_hits = 0;
    std::size_t retries = 0;
};

class TileFetcher {
public:
    TileFetcher(TileSource source, std::optional<TileCache> cache, HttpTransport& transport);

    /// Decoded 256x256 tile. Cache hits skip the network entirely.
    /// Throws FetchError after exhausting retries and DecodeError on a
    /// malformed payload (which is not cached).
    [[nodiscard]] Raster fetch_tile(const geo::TileCoord& tile);

    /// Raw payload bytes, from the cache when present.
    [[nodiscard]] std::vector<std::uint8_t> fetch_bytes(const geo::TileCoord& tile);

    /// Fetches every tile with up to `parallelism` concurrent requests.
    [[nodiscard]] std::map<geo::TileCoord, Raster> fetch_all(std::span<const geo::TileCoord> tiles,
                                                            std::size_t parallelism);

    /// Makes sure every tile is in the cache without decoding it.
    void prefetch(std::span<const geo::TileCoord> tiles, std::size_t parallelism);

    [[nodiscard]] FetchStats stats() const noexcept;
    [[nodiscard]] const std::optional<TileCache>& cache() const noexcept { return cache_; }

private:
    std::vector<std::uint8_t> download(const geo::TileCoord& tile);

    TileSource source_;
    std::optional<TileCache> cache_;
    HttpTransport& transport_;
    RateLimiter limiter_;
    std::atomic<std::size_t> network_requests_{0};
    std::atomic<std::size_t> cache_hits_{0};
    std::atomic<std::size_t> retries_{0};
};

/// Tiles fused into one raster, origin_tile at pixel (0, 0).
struct Mosaic {
    geo::ZoomLevel zoom;
    geo::TileCoord origin_tile;
    Raster pixels;

    [[nodiscard]] int width() const noexcept { return pixels.width(); }
    [[nodiscard]] int height() const noexcept { return pixels.height(); }
};

/// Geographic bbox to cover at a zoom level.
struct RegionRequest {
    geo::GeoPoint north_west;
    geo::GeoPoint south_east;
    geo::ZoomLevel zoom;
};

/// Throws ConfigError unless north_west is north-west of (or equal to)
/// south_east and both corners are valid.
void validate_region(const RegionRequest& request);

/// Minimal covering tile rectangle in row-major order. An inverted bbox
/// covers nothing and yields an empty list.
[[nodiscard]] std::vector<geo::TileCoord> plan_tiles(const RegionRequest& request);

/// Places tile (x, y) at pixels [(x-x0)*256, ...) x [(y-y0)*256, ...).
/// Throws AssemblyError listing the holes when the rectangle is incomplete.
[[nodiscard]] Mosaic assemble_mosaic(const std::map<geo::TileCoord, Raster>& tiles);

/// One sliding-window placement: top-left offset in the mosaic frame plus the
/// part of the 2000x2000 window that lies inside the mosaic.
struct CropWindow {
    int x = 0;
    int y = 0;
    int valid_width = 0;
    int valid_height = 0;

    friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

/// Window offsets along one axis of length `extent`: multiples of the stride
/// while the window fits, then one window anchored to the far edge. A single
/// offset 0 when the axis is shorter than a window.
[[nodiscard]] std::vector<int> window_offsets(int extent, int stride);

/// All window placements for a width x height mosaic, row-major.
[[nodiscard]] std::vector<CropWindow> plan_windows(int width, int height, int stride);

struct Crop {
    std::string id;
    geo::ZoomLevel zoom;
    geo::TileCoord mosaic_origin;
    int offset_x = 0;
    int offset_y = 0;
    int valid_width = kCropSize;
    int valid_height = kCropSize;
    /// Always kCropSize x kCropSize; zero-padded outside the valid region.
    std::shared_ptr<const Raster> pixels;
};

/// Stable identifier "z{z}_{tx}_{ty}_{ox}_{oy}" of a window.
[[nodiscard]] std::string crop_id(const geo::TileCoord& origin, int offset_x, int offset_y);

/// Mosaic assembled on demand from individual tiles, for regions too large
/// to hold in memory at once.
class TiledMosaicView {
public:
    using TileLoader = std::function<Raster(const geo::TileCoord&)>;

    /// `tiles` must be a complete row-major rectangle as from plan_tiles.
    TiledMosaicView(std::span<const geo::TileCoord> tiles, TileLoader loader);

    [[nodiscard]] int width() const noexcept { return columns_ * geo::kTileSize; }
    [[nodiscard]] int height() const noexcept { return rows_ * geo::kTileSize; }
    [[nodiscard]] const geo::TileCoord& origin_tile() const noexcept { return origin_; }
    [[nodiscard]] geo::ZoomLevel zoom() const noexcept { return origin_.z; }

    /// Copies the mosaic block at (x, y) of size w x h into dst at (dx, dy).
    void copy_region(int x, int y, int w, int h, Raster& dst, int dx, int dy) const;

private:
    geo::TileCoord origin_;
    int columns_ = 0;
    int rows_ = 0;
    TileLoader loader_;
};

[[nodiscard]] Crop extract_crop(const Mosaic& mosaic, const CropWindow& window);
[[nodiscard]] Crop extract_crop(const TiledMosaicView& view, const CropWindow& window);

/// Slices the mosaic into 2000x2000 crops; stride must be in [1, 2000].
[[nodiscard]] std::vector<Crop> slice_sliding_window(const Mosaic& mosaic, int stride);

/// Bicubic resize of a training image to the 2000x2000 detector input.
[[nodiscard]] Raster resize_to_crop(const Raster& image);

}  // namespace detdsci::ingest
