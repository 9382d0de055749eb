// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file image.hpp
/// Linear float RGB image and 8-bit PNG read/write via libpng.

#pragma once

#include "common.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>

namespace pfield {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb; // row-major, 3 floats per pixel, values in [0,1]

    Image() = default;
    Image(int w, int h, float fill = 0.0f)
        : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

    float &at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    std::size_t pixelCount() const { return static_cast<std::size_t>(width) * height; }
};

inline std::uint8_t
toByte(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

namespace detail {

struct FileCloser {
    void operator()(std::FILE *f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void
pngErrorHandler(png_structp png, png_const_charp msg) {
    (void)png;
    throw Error(ErrorCode::DecodeError, msg ? msg : "libpng error");
}

inline void
pngWarningHandler(png_structp, png_const_charp) {}

} // namespace detail

/// Reads only the PNG header; returns (width, height).
inline std::pair<int, int>
readPngSize(const std::filesystem::path &path) {
    detail::FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file)
        throw Error(std::filesystem::exists(path) ? ErrorCode::DecodeError : ErrorCode::NotFound,
                    "cannot open image " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw Error(ErrorCode::DecodeError, "not a PNG file: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             detail::pngErrorHandler, detail::pngWarningHandler);
    png_infop info = png_create_info_struct(png);
    std::pair<int, int> size{0, 0};
    try {
        png_init_io(png, file.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        size = {static_cast<int>(png_get_image_width(png, info)),
                static_cast<int>(png_get_image_height(png, info))};
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return size;
}

inline Image
readPng(const std::filesystem::path &path) {
    detail::FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file)
        throw Error(std::filesystem::exists(path) ? ErrorCode::DecodeError : ErrorCode::NotFound,
                    "cannot open image " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw Error(ErrorCode::DecodeError, "not a PNG file: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             detail::pngErrorHandler, detail::pngWarningHandler);
    png_infop info = png_create_info_struct(png);
    Image image;
    try {
        png_init_io(png, file.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);

        const png_byte colorType = png_get_color_type(png, info);
        const png_byte bitDepth = png_get_bit_depth(png, info);
        if (bitDepth == 16)
            png_set_strip_16(png);
        if (colorType == PNG_COLOR_TYPE_PALETTE)
            png_set_palette_to_rgb(png);
        if (colorType == PNG_COLOR_TYPE_GRAY && bitDepth < 8)
            png_set_expand_gray_1_2_4_to_8(png);
        if (colorType == PNG_COLOR_TYPE_GRAY || colorType == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        if (colorType & PNG_COLOR_MASK_ALPHA)
            png_set_strip_alpha(png);
        png_read_update_info(png, info);

        const int w = static_cast<int>(png_get_image_width(png, info));
        const int h = static_cast<int>(png_get_image_height(png, info));
        if (png_get_channels(png, info) != 3)
            throw Error(ErrorCode::DecodeError, "unsupported channel layout in " + path.string());
        std::vector<png_byte> buffer(static_cast<std::size_t>(w) * h * 3);
        std::vector<png_bytep> rows(h);
        for (int y = 0; y < h; ++y)
            rows[y] = buffer.data() + static_cast<std::size_t>(y) * w * 3;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);

        image = Image(w, h);
        for (std::size_t i = 0; i < buffer.size(); ++i)
            image.rgb[i] = static_cast<float>(buffer[i]) / 255.0f;
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

inline void
writePng(const std::filesystem::path &path, const Image &image) {
    detail::FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file)
        throw Error(ErrorCode::WriteError, "cannot open for writing: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              detail::pngErrorHandler, detail::pngWarningHandler);
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, file.get());
        png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 3);
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x)
                for (int c = 0; c < 3; ++c)
                    row[static_cast<std::size_t>(x) * 3 + c] = toByte(image.at(x, y, c));
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
    } catch (const Error &e) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::WriteError, e.what());
    }
    png_destroy_write_struct(&png, &info);
    if (std::ferror(file.get()))
        throw Error(ErrorCode::WriteError, "write failed: " + path.string());
}

/// Quantizes to 8 bits and back, matching what a PNG round trip would produce.
inline Image
quantize8(const Image &image) {
    Image out = image;
    for (auto &v : out.rgb)
        v = static_cast<float>(toByte(v)) / 255.0f;
    return out;
}

} // namespace pfield
