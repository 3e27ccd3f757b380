#include "detdsci/image_codec.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include "fmt_path.hpp"
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace detdsci {

namespace {

cv::Mat as_rgb_mat(const Raster& raster)
{
    // OpenCV only reads through this header; the const_cast never writes.
    auto* data = const_cast<std::uint8_t*>(raster.bytes().data());
    return {raster.height(), raster.width(), CV_8UC3, data};
}

Raster from_bgr(const cv::Mat& bgr)
{
    cv::Mat rgb;
    switch (bgr.channels()) {
    case 1:
        cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
        break;
    case 4:
        cv::cvtColor(bgr, rgb, cv::COLOR_BGRA2RGB);
        break;
    default:
        cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
        break;
    }
    std::vector<std::uint8_t> data(rgb.total() * 3);
    if (rgb.isContinuous()) {
        std::copy(rgb.datastart, rgb.dataend, data.begin());
    } else {
        for (int y = 0; y < rgb.rows; ++y) {
            std::copy(rgb.ptr<std::uint8_t>(y), rgb.ptr<std::uint8_t>(y) + rgb.cols * 3,
                      data.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
        }
    }
    return {rgb.cols, rgb.rows, std::move(data)};
}

}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes)
{
    if (bytes.empty()) {
        throw DecodeError("empty image payload");
    }
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                         const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat decoded;
    try {
        decoded = cv::imdecode(buffer, cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception& e) {
        throw DecodeError(fmt::format("image decode failed: {}", e.what()));
    }
    if (decoded.empty() || decoded.depth() != CV_8U) {
        throw DecodeError("payload is not an 8-bit PNG or JPEG image");
    }
    return from_bgr(decoded);
}

std::vector<std::uint8_t> encode_png(const Raster& raster)
{
    cv::Mat bgr;
    cv::cvtColor(as_rgb_mat(raster), bgr, cv::COLOR_RGB2BGR);
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr, out)) {
        throw Error("PNG encoding failed");
    }
    return out;
}

Raster read_image(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(fmt::format("cannot open image {}", path));
    }
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), {}};
    return decode_image(bytes);
}

void write_png(const std::filesystem::path& path, const Raster& raster)
{
    const auto bytes = encode_png(raster);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(fmt::format("cannot write image {}", path));
    }
}

Raster resize_bicubic(const Raster& raster, int width, int height)
{
    if (raster.width() == width && raster.height() == height) {
        return raster;
    }
    cv::Mat out;
    cv::resize(as_rgb_mat(raster), out, cv::Size(width, height), 0.0, 0.0, cv::INTER_CUBIC);
    std::vector<std::uint8_t> data(out.datastart, out.dataend);
    return {width, height, std::move(data)};
}

std::vector<float> resize_bilinear(std::span<const float> rgb, int width, int height,
                                   int out_width, int out_height)
{
    const cv::Mat in(height, width, CV_32FC3, const_cast<float*>(rgb.data()));
    cv::Mat out;
    cv::resize(in, out, cv::Size(out_width, out_height), 0.0, 0.0, cv::INTER_LINEAR);
    return {reinterpret_cast<const float*>(out.datastart), reinterpret_cast<const float*>(out.dataend)};
}

}  // namespace detdsci
