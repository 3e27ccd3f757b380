#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace detdsci {

/// 8-bit interleaved RGB image.
class Raster {
public:
    static constexpr int kChannels = 3;

    Raster() = default;
    Raster(int width, int height);
    Raster(int width, int height, std::vector<std::uint8_t> rgb);

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    [[nodiscard]] std::span<std::uint8_t> row(int y);
    [[nodiscard]] std::span<const std::uint8_t> row(int y) const;
    [[nodiscard]] std::span<std::uint8_t> pixel(int x, int y);
    [[nodiscard]] std::span<const std::uint8_t> pixel(int x, int y) const;

    [[nodiscard]] std::span<std::uint8_t> bytes() noexcept { return data_; }
    [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return data_; }

    void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b);

    /// Copies a w x h block of `src` at (sx, sy) into this raster at (dx, dy).
    /// The block must lie inside both rasters.
    void blit(const Raster& src, int sx, int sy, int w, int h, int dx, int dy);

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// 64-bit FNV-1a digest, used for cheap raster checksums.
[[nodiscard]] std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

}  // namespace detdsci
