#include "detdsci/ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <thread>

#include <fmt/format.h>
#include "fmt_path.hpp"
#include <spdlog/spdlog.h>

#include "detdsci/image_codec.hpp"
#include "detdsci/worker_pool.hpp"

namespace detdsci::ingest {

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle)
{
    std::size_t count = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

void replace_all(std::string& text, std::string_view token, std::string_view value)
{
    for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
        text.replace(pos, token.size(), value);
    }
}

std::string describe(const geo::TileCoord& t)
{
    return fmt::format("{}/{}/{}", t.z.value(), t.x, t.y);
}

}  // namespace

void TileSource::validate() const
{
    for (const std::string_view token : {"{z}", "{x}", "{y}"}) {
        if (count_occurrences(url_template, token) != 1) {
            throw ConfigError(
                fmt::format("tile URL template must contain {} exactly once", token));
        }
    }
    if (count_occurrences(url_template, "{key}") > 0 && api_key_ref.empty()) {
        throw ConfigError("tile URL template uses {key} but no api_key_ref is set");
    }
    if (retry.max_attempts < 1) {
        throw ConfigError("retry.max_attempts must be at least 1");
    }
    if (retry.backoff_base.count() < 0) {
        throw ConfigError("retry.backoff_base must be non-negative");
    }
}

std::string TileSource::url_for(const geo::TileCoord& tile) const
{
    std::string url = url_template;
    replace_all(url, "{z}", std::to_string(tile.z.value()));
    replace_all(url, "{x}", std::to_string(tile.x));
    replace_all(url, "{y}", std::to_string(tile.y));
    if (url.find("{key}") != std::string::npos) {
        const char* key = std::getenv(api_key_ref.c_str());
        if (key == nullptr) {
            throw ConfigError(fmt::format("environment variable {} is not set", api_key_ref));
        }
        replace_all(url, "{key}", key);
    }
    return url;
}

FetchError::FetchError(const geo::TileCoord& tile, const std::string& what)
    : Error(fmt::format("tile {}: {}", describe(tile), what)), tile_(tile)
{
}

AssemblyError::AssemblyError(const std::string& what, std::vector<geo::TileCoord> holes)
    : Error(what), holes_(std::move(holes))
{
}

RateLimiter::RateLimiter(double per_second)
{
    if (per_second > 0.0) {
        interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / per_second));
    }
}

void RateLimiter::acquire()
{
    if (interval_ == std::chrono::steady_clock::duration::zero()) {
        return;
    }
    std::chrono::steady_clock::time_point slot;
    {
        const std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

TileCache::TileCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path TileCache::path_for(const geo::TileCoord& tile) const
{
    return root_ / std::to_string(tile.z.value()) / std::to_string(tile.x) /
           (std::to_string(tile.y) + ".png");
}

std::optional<std::vector<std::uint8_t>> TileCache::load(const geo::TileCoord& tile) const
{
    std::ifstream in(path_for(tile), std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void TileCache::store(const geo::TileCoord& tile, std::span<const std::uint8_t> bytes) const
{
    const auto path = path_for(tile);
    std::filesystem::create_directories(path.parent_path());
    // Write-then-rename keeps concurrent readers from seeing partial files.
    auto tmp = path;
    tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error(fmt::format("cannot write cache file {}", tmp));
        }
    }
    std::filesystem::rename(tmp, path);
}

TileFetcher::TileFetcher(TileSource source, std::optional<TileCache> cache, HttpTransport& transport)
    : source_(std::move(source)), cache_(std::move(cache)), transport_(transport),
      limiter_(source_.rate_limit)
{
    source_.validate();
}

std::vector<std::uint8_t> TileFetcher::download(const geo::TileCoord& tile)
{
    const std::string url = source_.url_for(tile);
    std::string last_error;
    for (int attempt = 1; attempt <= source_.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            ++retries_;
            std::this_thread::sleep_for(source_.retry.backoff_base * (1 << (attempt - 2)));
        }
        limiter_.acquire();
        ++network_requests_;
        try {
            HttpResponse response = transport_.get(url);
            if (response.status == 200) {
                return {response.body.begin(), response.body.end()};
            }
            last_error = fmt::format("HTTP status {}", response.status);
        } catch (const TransportError& e) {
            last_error = e.what();
        }
        spdlog::debug("tile {} attempt {}/{} failed: {}", describe(tile), attempt,
                      source_.retry.max_attempts, last_error);
    }
    throw FetchError(tile, fmt::format("giving up after {} attempts ({})",
                                       source_.retry.max_attempts, last_error));
}

std::vector<std::uint8_t> TileFetcher::fetch_bytes(const geo::TileCoord& tile)
{
    if (cache_) {
        if (auto cached = cache_->load(tile)) {
            ++cache_hits_;
            return std::move(*cached);
        }
    }
    return download(tile);
}

Raster TileFetcher::fetch_tile(const geo::TileCoord& tile)
{
    const bool cached = cache_ && std::filesystem::exists(cache_->path_for(tile));
    const auto bytes = fetch_bytes(tile);
    Raster raster;
    try {
        raster = decode_image(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(fmt::format("tile {}: {}", describe(tile), e.what()));
    }
    if (raster.width() != geo::kTileSize || raster.height() != geo::kTileSize) {
        throw DecodeError(fmt::format("tile {}: expected {}x{} pixels, got {}x{}", describe(tile),
                                      geo::kTileSize, geo::kTileSize, raster.width(), raster.height()));
    }
    if (cache_ && !cached) {
        cache_->store(tile, bytes);
    }
    return raster;
}

std::map<geo::TileCoord, Raster> TileFetcher::fetch_all(std::span<const geo::TileCoord> tiles,
                                                       std::size_t parallelism)
{
    std::vector<Raster> rasters(tiles.size());
    for_each_index(tiles.size(), parallelism, [&](std::size_t i) { rasters[i] = fetch_tile(tiles[i]); });
    std::map<geo::TileCoord, Raster> out;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        out.emplace(tiles[i], std::move(rasters[i]));
    }
    return out;
}

void TileFetcher::prefetch(std::span<const geo::TileCoord> tiles, std::size_t parallelism)
{
    if (!cache_) {
        throw ConfigError("prefetch requires a tile cache");
    }
    for_each_index(tiles.size(), parallelism, [&](std::size_t i) {
        if (!std::filesystem::exists(cache_->path_for(tiles[i]))) {
            (void)fetch_tile(tiles[i]);
        } else {
            ++cache_hits_;
        }
    });
}

FetchStats TileFetcher::stats() const noexcept
{
    return {network_requests_.load(), cache_hits_.load(), retries_.load()};
}

void validate_region(const RegionRequest& request)
{
    try {
        geo::validate(request.north_west);
        geo::validate(request.south_east);
    } catch (const std::domain_error& e) {
        throw ConfigError(fmt::format("invalid region corner: {}", e.what()));
    }
    if (request.north_west.latitude < request.south_east.latitude ||
        request.north_west.longitude > request.south_east.longitude) {
        throw ConfigError("region north_west corner must be north-west of south_east");
    }
}

std::vector<geo::TileCoord> plan_tiles(const RegionRequest& request)
{
    if (request.north_west.latitude < request.south_east.latitude ||
        request.north_west.longitude > request.south_east.longitude) {
        return {};
    }
    const auto nw = geo::geo_to_tile(request.north_west, request.zoom);
    const auto se = geo::geo_to_tile(request.south_east, request.zoom);
    std::vector<geo::TileCoord> tiles;
    tiles.reserve(static_cast<std::size_t>(se.x - nw.x + 1) * (se.y - nw.y + 1));
    for (std::uint32_t y = nw.y; y <= se.y; ++y) {
        for (std::uint32_t x = nw.x; x <= se.x; ++x) {
            tiles.emplace_back(request.zoom, x, y);
        }
    }
    return tiles;
}

Mosaic assemble_mosaic(const std::map<geo::TileCoord, Raster>& tiles)
{
    if (tiles.empty()) {
        throw AssemblyError("no tiles to assemble", {});
    }
    const geo::ZoomLevel zoom = tiles.begin()->first.z;
    std::uint32_t x0 = UINT32_MAX, y0 = UINT32_MAX, x1 = 0, y1 = 0;
    for (const auto& [coord, raster] : tiles) {
        if (coord.z != zoom) {
            throw AssemblyError("tiles span more than one zoom level", {});
        }
        if (raster.width() != geo::kTileSize || raster.height() != geo::kTileSize) {
            throw AssemblyError(fmt::format("tile {} is not {}x{}", describe(coord), geo::kTileSize,
                                            geo::kTileSize),
                                {});
        }
        x0 = std::min(x0, coord.x);
        y0 = std::min(y0, coord.y);
        x1 = std::max(x1, coord.x);
        y1 = std::max(y1, coord.y);
    }

    std::vector<geo::TileCoord> holes;
    for (std::uint32_t y = y0; y <= y1; ++y) {
        for (std::uint32_t x = x0; x <= x1; ++x) {
            if (!tiles.contains(geo::TileCoord{zoom, x, y})) {
                holes.emplace_back(zoom, x, y);
            }
        }
    }
    if (!holes.empty()) {
        std::string listed;
        for (const auto& h : holes) {
            listed += (listed.empty() ? "" : ", ") + describe(h);
        }
        throw AssemblyError(fmt::format("tile rectangle has {} hole(s): {}", holes.size(), listed),
                            std::move(holes));
    }

    const int columns = static_cast<int>(x1 - x0 + 1);
    const int rows = static_cast<int>(y1 - y0 + 1);
    Raster pixels(columns * geo::kTileSize, rows * geo::kTileSize);
    for (const auto& [coord, raster] : tiles) {
        pixels.blit(raster, 0, 0, geo::kTileSize, geo::kTileSize,
                    static_cast<int>(coord.x - x0) * geo::kTileSize,
                    static_cast<int>(coord.y - y0) * geo::kTileSize);
    }
    return {zoom, geo::TileCoord{zoom, x0, y0}, std::move(pixels)};
}

std::vector<int> window_offsets(int extent, int stride)
{
    if (stride < 1 || stride > kCropSize) {
        throw std::invalid_argument(fmt::format("stride {} outside [1, {}]", stride, kCropSize));
    }
    if (extent <= kCropSize) {
        return {0};
    }
    std::vector<int> offsets;
    const int last = extent - kCropSize;
    for (int offset = 0; offset < last; offset += stride) {
        offsets.push_back(offset);
    }
    offsets.push_back(last);
    return offsets;
}

std::vector<CropWindow> plan_windows(int width, int height, int stride)
{
    if (width <= 0 || height <= 0) {
        return {};
    }
    const auto xs = window_offsets(width, stride);
    const auto ys = window_offsets(height, stride);
    std::vector<CropWindow> windows;
    windows.reserve(xs.size() * ys.size());
    for (const int y : ys) {
        for (const int x : xs) {
            windows.push_back({x, y, std::min(kCropSize, width - x), std::min(kCropSize, height - y)});
        }
    }
    return windows;
}

std::string crop_id(const geo::TileCoord& origin, int offset_x, int offset_y)
{
    return fmt::format("z{}_{}_{}_{}_{}", origin.z.value(), origin.x, origin.y, offset_x, offset_y);
}

TiledMosaicView::TiledMosaicView(std::span<const geo::TileCoord> tiles, TileLoader loader)
    : origin_(tiles.empty() ? throw AssemblyError("no tiles in view", {}) : tiles.front()),
      loader_(std::move(loader))
{
    const auto& last = tiles.back();
    columns_ = static_cast<int>(last.x - origin_.x + 1);
    rows_ = static_cast<int>(last.y - origin_.y + 1);
    if (static_cast<std::size_t>(columns_) * static_cast<std::size_t>(rows_) != tiles.size()) {
        throw AssemblyError("tile list is not a complete row-major rectangle", {});
    }
}

void TiledMosaicView::copy_region(int x, int y, int w, int h, Raster& dst, int dx, int dy) const
{
    constexpr int ts = geo::kTileSize;
    for (int ty = y / ts; ty * ts < y + h; ++ty) {
        for (int tx = x / ts; tx * ts < x + w; ++tx) {
            const Raster tile = loader_(geo::TileCoord{origin_.z, origin_.x + static_cast<std::uint32_t>(tx),
                                                       origin_.y + static_cast<std::uint32_t>(ty)});
            const int sx0 = std::max(x, tx * ts);
            const int sy0 = std::max(y, ty * ts);
            const int sx1 = std::min(x + w, (tx + 1) * ts);
            const int sy1 = std::min(y + h, (ty + 1) * ts);
            dst.blit(tile, sx0 - tx * ts, sy0 - ty * ts, sx1 - sx0, sy1 - sy0, dx + sx0 - x, dy + sy0 - y);
        }
    }
}

namespace {

template <typename CopyFn>
Crop make_crop(geo::ZoomLevel zoom, const geo::TileCoord& origin, const CropWindow& window, CopyFn&& copy)
{
    auto pixels = std::make_shared<Raster>(kCropSize, kCropSize);
    copy(*pixels);
    return Crop{crop_id(origin, window.x, window.y),
                zoom,
                origin,
                window.x,
                window.y,
                window.valid_width,
                window.valid_height,
                std::move(pixels)};
}

}  // namespace

Crop extract_crop(const Mosaic& mosaic, const CropWindow& window)
{
    return make_crop(mosaic.zoom, mosaic.origin_tile, window, [&](Raster& dst) {
        dst.blit(mosaic.pixels, window.x, window.y, window.valid_width, window.valid_height, 0, 0);
    });
}

Crop extract_crop(const TiledMosaicView& view, const CropWindow& window)
{
    return make_crop(view.zoom(), view.origin_tile(), window, [&](Raster& dst) {
        view.copy_region(window.x, window.y, window.valid_width, window.valid_height, dst, 0, 0);
    });
}

std::vector<Crop> slice_sliding_window(const Mosaic& mosaic, int stride)
{
    std::vector<Crop> crops;
    for (const auto& window : plan_windows(mosaic.width(), mosaic.height(), stride)) {
        crops.push_back(extract_crop(mosaic, window));
    }
    return crops;
}

Raster resize_to_crop(const Raster& image)
{
    return resize_bicubic(image, kCropSize, kCropSize);
}

}  // namespace detdsci::ingest
