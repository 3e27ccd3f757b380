#include "detdsci/raster.hpp"

#include <algorithm>
#include <stdexcept>

namespace detdsci {

Raster::Raster(int width, int height)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels, 0)
{
    if (width < 0 || height < 0) {
        throw std::invalid_argument("raster dimensions must be non-negative");
    }
}

Raster::Raster(int width, int height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), data_(std::move(rgb))
{
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels) {
        throw std::invalid_argument("raster buffer does not match its dimensions");
    }
}

std::span<std::uint8_t> Raster::row(int y)
{
    const auto stride = static_cast<std::size_t>(width_) * kChannels;
    return {data_.data() + static_cast<std::size_t>(y) * stride, stride};
}

std::span<const std::uint8_t> Raster::row(int y) const
{
    const auto stride = static_cast<std::size_t>(width_) * kChannels;
    return {data_.data() + static_cast<std::size_t>(y) * stride, stride};
}

std::span<std::uint8_t> Raster::pixel(int x, int y)
{
    return row(y).subspan(static_cast<std::size_t>(x) * kChannels, kChannels);
}

std::span<const std::uint8_t> Raster::pixel(int x, int y) const
{
    return row(y).subspan(static_cast<std::size_t>(x) * kChannels, kChannels);
}

void Raster::fill(std::uint8_t r, std::uint8_t g, std::uint8_t b)
{
    for (std::size_t i = 0; i < data_.size(); i += kChannels) {
        data_[i] = r;
        data_[i + 1] = g;
        data_[i + 2] = b;
    }
}

void Raster::blit(const Raster& src, int sx, int sy, int w, int h, int dx, int dy)
{
    if (w <= 0 || h <= 0) {
        return;
    }
    if (sx < 0 || sy < 0 || sx + w > src.width_ || sy + h > src.height_ ||
        dx < 0 || dy < 0 || dx + w > width_ || dy + h > height_) {
        throw std::out_of_range("blit region outside raster bounds");
    }
    const auto bytes = static_cast<std::size_t>(w) * kChannels;
    for (int j = 0; j < h; ++j) {
        const auto from = src.row(sy + j).subspan(static_cast<std::size_t>(sx) * kChannels, bytes);
        std::copy(from.begin(), from.end(),
                  row(dy + j).begin() + static_cast<std::ptrdiff_t>(dx) * kChannels);
    }
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const auto b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace detdsci
