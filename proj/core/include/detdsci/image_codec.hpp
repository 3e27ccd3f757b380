#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "detdsci/errors.hpp"
#include "detdsci/raster.hpp"

namespace detdsci {

/// Payload that is not a decodable PNG/JPEG image.
class DecodeError : public Error {
public:
    using Error::Error;
};

/// Decodes PNG or JPEG bytes into RGB. Grayscale/alpha inputs are converted.
[[nodiscard]] Raster decode_image(std::span<const std::uint8_t> bytes);

[[nodiscard]] std::vector<std::uint8_t> encode_png(const Raster& raster);

[[nodiscard]] Raster read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& raster);

/// Bicubic resampling to the requested size.
[[nodiscard]] Raster resize_bicubic(const Raster& raster, int width, int height);

/// Bilinear resampling of a float RGB buffer (width*height*3 floats).
[[nodiscard]] std::vector<float> resize_bilinear(std::span<const float> rgb, int width, int height,
                                                 int out_width, int out_height);

}  // namespace detdsci
