#include "detdsci/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "detdsci/errors.hpp"
#include "detdsci/image_codec.hpp"

namespace detdsci::dataset {

namespace {

constexpr std::array<std::string_view, 8> kNames{"DA1", "DA2", "DA3", "DA4",
                                                 "DA5", "DA6", "DA7", "DA8"};
constexpr std::array<std::string_view, 8> kDescriptions{
    "Normalize image",          "Random image scale",         "Random rgb to gray",
    "Random adjust brightness", "Random adjust contrast",     "Random adjust hue",
    "Random adjust saturation", "Random distort colour"};

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

float clamp01(double v)
{
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

void normalize(FloatImage& img)
{
    const std::size_t n = img.rgb.size() / 3;
    if (n == 0) {
        return;
    }
    for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += img.rgb[i * 3 + c];
        }
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = img.rgb[i * 3 + c] - mean;
            sq += d * d;
        }
        const double stddev = std::sqrt(sq / static_cast<double>(n));
        const double scale = stddev > 0.0 ? 1.0 / stddev : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto& v = img.rgb[i * 3 + c];
            v = static_cast<float>((v - mean) * scale);
        }
    }
}

void to_gray(FloatImage& img)
{
    for (std::size_t i = 0; i + 2 < img.rgb.size(); i += 3) {
        const float y = clamp01(0.299 * img.rgb[i] + 0.587 * img.rgb[i + 1] + 0.114 * img.rgb[i + 2]);
        img.rgb[i] = img.rgb[i + 1] = img.rgb[i + 2] = y;
    }
}

void brightness(FloatImage& img, double delta)
{
    for (auto& v : img.rgb) {
        v = clamp01(v + delta);
    }
}

void contrast(FloatImage& img, double factor)
{
    const std::size_t n = img.rgb.size() / 3;
    if (n == 0) {
        return;
    }
    for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += img.rgb[i * 3 + c];
        }
        const double mean = sum / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& v = img.rgb[i * 3 + c];
            v = clamp01((v - mean) * factor + mean);
        }
    }
}

struct Hsv {
    double h, s, v;
};

Hsv rgb_to_hsv(double r, double g, double b)
{
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    double h = 0.0;
    if (d > 0.0) {
        if (mx == r) {
            h = std::fmod((g - b) / d, 6.0);
        } else if (mx == g) {
            h = (b - r) / d + 2.0;
        } else {
            h = (r - g) / d + 4.0;
        }
        h /= 6.0;
        if (h < 0.0) {
            h += 1.0;
        }
    }
    return {h, mx > 0.0 ? d / mx : 0.0, mx};
}

std::array<double, 3> hsv_to_rgb(Hsv c)
{
    const double h6 = c.h * 6.0;
    const int sector = static_cast<int>(std::floor(h6)) % 6;
    const double f = h6 - std::floor(h6);
    const double p = c.v * (1.0 - c.s);
    const double q = c.v * (1.0 - c.s * f);
    const double t = c.v * (1.0 - c.s * (1.0 - f));
    switch (sector) {
    case 0:
        return {c.v, t, p};
    case 1:
        return {q, c.v, p};
    case 2:
        return {p, c.v, t};
    case 3:
        return {p, q, c.v};
    case 4:
        return {t, p, c.v};
    default:
        return {c.v, p, q};
    }
}

template <typename Fn>
void map_hsv(FloatImage& img, Fn&& fn)
{
    for (std::size_t i = 0; i + 2 < img.rgb.size(); i += 3) {
        Hsv c = rgb_to_hsv(img.rgb[i], img.rgb[i + 1], img.rgb[i + 2]);
        fn(c);
        const auto rgb = hsv_to_rgb(c);
        for (std::size_t k = 0; k < 3; ++k) {
            img.rgb[i + k] = clamp01(rgb[k]);
        }
    }
}

void hue(FloatImage& img, double delta)
{
    map_hsv(img, [delta](Hsv& c) {
        c.h = std::fmod(c.h + delta, 1.0);
        if (c.h < 0.0) {
            c.h += 1.0;
        }
    });
}

void saturation(FloatImage& img, double factor)
{
    map_hsv(img, [factor](Hsv& c) { c.s = std::clamp(c.s * factor, 0.0, 1.0); });
}

// Two fixed orderings of the four colour ops, with the wider ranges used by
// the TF object-detection "random_distort_color" step.
void distort_colour(FloatImage& img, Rng& rng)
{
    const bool ordering = std::bernoulli_distribution(0.5)(rng);
    const double b = uniform(rng, -32.0 / 255.0, 32.0 / 255.0);
    const double s = uniform(rng, 0.5, 1.5);
    const double h = uniform(rng, -0.2, 0.2);
    const double c = uniform(rng, 0.5, 1.5);
    if (!ordering) {
        brightness(img, b);
        saturation(img, s);
        hue(img, h);
        contrast(img, c);
    } else {
        brightness(img, b);
        contrast(img, c);
        saturation(img, s);
        hue(img, h);
    }
}

}  // namespace

std::string_view to_string(DATechnique t) noexcept
{
    return kNames.at(static_cast<std::size_t>(t));
}

std::string_view description(DATechnique t) noexcept
{
    return kDescriptions.at(static_cast<std::size_t>(t));
}

DATechnique parse_da_technique(std::string_view text)
{
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (text == kNames[i]) {
            return static_cast<DATechnique>(i);
        }
    }
    throw ParseError(fmt::format("unknown DA technique '{}' (expected DA1..DA8)", text));
}

FloatImage FloatImage::from_raster(const Raster& raster)
{
    FloatImage img{raster.width(), raster.height(), {}};
    img.rgb.reserve(raster.bytes().size());
    for (const auto b : raster.bytes()) {
        img.rgb.push_back(static_cast<float>(b) / 255.0f);
    }
    return img;
}

Raster FloatImage::to_raster() const
{
    std::vector<std::uint8_t> bytes;
    bytes.reserve(rgb.size());
    for (const float v : rgb) {
        bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    }
    return {width, height, std::move(bytes)};
}

AugmentResult augment(const FloatImage& image, DATechnique t, std::uint64_t seed,
                      const AugmentParams& params)
{
    Rng rng(seed);
    AugmentResult out{image, std::nullopt};
    auto& img = out.image;
    switch (t) {
    case DATechnique::DA1:
        normalize(img);
        break;
    case DATechnique::DA2: {
        const double factor = uniform(rng, params.scale_lower, params.scale_upper);
        const int w = std::max(1, static_cast<int>(std::lround(image.width * factor)));
        const int h = std::max(1, static_cast<int>(std::lround(image.height * factor)));
        if (!image.rgb.empty()) {
            img = {w, h, resize_bilinear(image.rgb, image.width, image.height, w, h)};
        }
        out.scale_factor = factor;
        break;
    }
    case DATechnique::DA3:
        if (std::bernoulli_distribution(params.gray_probability)(rng)) {
            to_gray(img);
        }
        break;
    case DATechnique::DA4:
        brightness(img, uniform(rng, -params.brightness_delta, params.brightness_delta));
        break;
    case DATechnique::DA5:
        contrast(img, uniform(rng, params.contrast_lower, params.contrast_upper));
        break;
    case DATechnique::DA6:
        hue(img, uniform(rng, -params.hue_delta, params.hue_delta));
        break;
    case DATechnique::DA7:
        saturation(img, uniform(rng, params.saturation_lower, params.saturation_upper));
        break;
    case DATechnique::DA8:
        distort_colour(img, rng);
        break;
    }
    return out;
}

}  // namespace detdsci::dataset
