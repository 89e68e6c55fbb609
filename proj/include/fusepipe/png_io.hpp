#pragma once

#include <png.h>

#include <cstring>
#include <filesystem>
#include <vector>

#include "fusepipe/error.hpp"
#include "fusepipe/imgprep.hpp"

namespace fusepipe::imgprep {

/// BT.601 luma, rounded half-up in exact integer arithmetic.
constexpr std::uint8_t luma601(unsigned r, unsigned g, unsigned b) noexcept {
    return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

inline GrayImage read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        fail(ErrorCode::Io, "cannot read PNG " + path.string() + ": " + image.message);
    image.format = PNG_FORMAT_RGBA;
    std::vector<png_byte> rgba(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
        png_image_free(&image);
        fail(ErrorCode::Io, "cannot decode PNG " + path.string() + ": " + image.message);
    }
    const int w = static_cast<int>(image.width);
    const int h = static_cast<int>(image.height);
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = luma601(rgba[4 * i], rgba[4 * i + 1], rgba[4 * i + 2]);
    return GrayImage(w, h, std::move(gray));
}

inline void write_png(const GrayImage& img, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.data().data(), 0, nullptr))
        fail(ErrorCode::Io, "cannot write PNG " + path.string() + ": " + image.message);
}

} // namespace fusepipe::imgprep
