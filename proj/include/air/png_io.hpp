#pragma once

// 8-bit grayscale PNG rendering of attention maps, for visualisation only.
// Requires linking libpng.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include "air/attention.hpp"
#include "air/error.hpp"

namespace air {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};

using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace detail

/// Writes the map scaled by its maximum to 0..255. An all-zero map is black.
inline void save_png(const std::filesystem::path& path, const AttentionMap& map)
{
    detail::FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "libpng failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(map.cols()), static_cast<png_uint_32>(map.rows()), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const double peak = map.max();
    std::vector<png_byte> row(map.cols());
    for (std::size_t r = 0; r < map.rows(); ++r) {
        for (std::size_t c = 0; c < map.cols(); ++c) {
            const double v = peak > 0.0 ? map.at(r, c) / peak : 0.0;
            row[c] = static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Reads an 8-bit grayscale PNG into a map with values in [0, 1].
inline AttentionMap load_png(const std::filesystem::path& path)
{
    detail::FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::SchemaViolation, "unreadable PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::SchemaViolation, path.string() + " is not an 8-bit grayscale PNG");
    }
    const auto cols = png_get_image_width(png, info);
    const auto rows = png_get_image_height(png, info);
    AttentionMap map = AttentionMap(rows, cols, Frame{static_cast<double>(cols), static_cast<double>(rows)});
    std::vector<png_byte> row(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (std::size_t c = 0; c < cols; ++c) {
            map.at(r, c) = row[c] / 255.0;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return map;
}

} // namespace air
