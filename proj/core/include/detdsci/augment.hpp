#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "detdsci/raster.hpp"

namespace detdsci::dataset {

enum class DATechnique {
    DA1,  ///< normalize image
    DA2,  ///< random image scale
    DA3,  ///< random rgb to gray
    DA4,  ///< random adjust brightness
    DA5,  ///< random adjust contrast
    DA6,  ///< random adjust hue
    DA7,  ///< random adjust saturation
    DA8,  ///< random distort colour
};

[[nodiscard]] std::string_view to_string(DATechnique t) noexcept;
[[nodiscard]] std::string_view description(DATechnique t) noexcept;
/// Parses "DA1".."DA8". Throws ParseError.
[[nodiscard]] DATechnique parse_da_technique(std::string_view text);

/// Interleaved RGB float image. Values are in [0, 1] except after DA1.
struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    [[nodiscard]] static FloatImage from_raster(const Raster& raster);
    /// Rounds and clamps back to 8 bits.
    [[nodiscard]] Raster to_raster() const;

    friend bool operator==(const FloatImage&, const FloatImage&) = default;
};

struct AugmentParams {
    double gray_probability = 0.1;
    double brightness_delta = 32.0 / 255.0;
    double contrast_lower = 0.8;
    double contrast_upper = 1.25;
    double hue_delta = 0.05;
    double saturation_lower = 0.8;
    double saturation_upper = 1.25;
    double scale_lower = 0.5;
    double scale_upper = 2.0;
};

struct AugmentResult {
    FloatImage image;
    /// Set by DA2 only.
    std::optional<double> scale_factor;
};

/// Applies one technique. Deterministic for a given seed.
[[nodiscard]] AugmentResult augment(const FloatImage& image, DATechnique t, std::uint64_t seed,
                                    const AugmentParams& params = {});

}  // namespace detdsci::dataset
