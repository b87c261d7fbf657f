/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/png_io.cpp
 *
 * Copyright 2026 The facekit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "facekit/png_io.hpp"

#include <json.hpp>
#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace facekit {

namespace {

struct FileCloser
{
    void operator()(std::FILE* f) const
    {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint8_t to_u8(double v)
{
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

uint16_t to_u16(double v)
{
    return static_cast<uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

void write_png(const std::string& path, int width, int height, int bit_depth, int color_type,
               const std::vector<png_bytep>& rows)
{
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info)
    {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng error writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16)
        png_set_swap(png); // rows are little-endian in memory
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

void write_png_rgb(const ImageRGB& image, const std::string& path)
{
    const int w = image.width(), h = image.height();
    std::vector<uint8_t> data(static_cast<size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
    {
        rows[y] = data.data() + static_cast<size_t>(y) * w * 3;
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                rows[y][3 * x + c] = to_u8(image.at(x, y)[c]);
    }
    write_png(path, w, h, 8, PNG_COLOR_TYPE_RGB, rows);
}

void write_png_rgba(const ImageRGB& image, const Image<double>& alpha, const std::string& path)
{
    if (alpha.width() != image.width() || alpha.height() != image.height())
        throw std::invalid_argument("write_png_rgba: alpha dimensions mismatch");
    const int w = image.width(), h = image.height();
    std::vector<uint8_t> data(static_cast<size_t>(w) * h * 4);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
    {
        rows[y] = data.data() + static_cast<size_t>(y) * w * 4;
        for (int x = 0; x < w; ++x)
        {
            for (int c = 0; c < 3; ++c)
                rows[y][4 * x + c] = to_u8(image.at(x, y)[c]);
            rows[y][4 * x + 3] = to_u8(alpha.at(x, y));
        }
    }
    write_png(path, w, h, 8, PNG_COLOR_TYPE_RGBA, rows);
}

void write_png_gray16(const Image<double>& image, const std::string& path)
{
    const int w = image.width(), h = image.height();
    std::vector<uint16_t> data(static_cast<size_t>(w) * h);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
    {
        rows[y] = reinterpret_cast<png_bytep>(data.data() + static_cast<size_t>(y) * w);
        for (int x = 0; x < w; ++x)
            data[static_cast<size_t>(y) * w + x] = to_u16(image.at(x, y));
    }
    write_png(path, w, h, 16, PNG_COLOR_TYPE_GRAY, rows);
}

namespace {

struct PngReader
{
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

} // namespace

ImageRGB read_png_rgb(const std::string& path)
{
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw std::runtime_error("read_png_rgb: cannot open " + path);
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = r.png ? png_create_info_struct(r.png) : nullptr;
    if (!r.png || !r.info)
        throw std::runtime_error("read_png_rgb: libpng init failed");
    if (setjmp(png_jmpbuf(r.png)))
        throw std::runtime_error("read_png_rgb: libpng error reading " + path);
    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);
    png_set_expand(r.png);
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);
    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    std::vector<uint8_t> data(static_cast<size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = data.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(r.png, rows.data());
    ImageRGB image(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            image.at(x, y) = Vec3(rows[y][3 * x], rows[y][3 * x + 1], rows[y][3 * x + 2]) / 255.0;
    return image;
}

Image<double> read_png_gray16(const std::string& path)
{
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw std::runtime_error("read_png_gray16: cannot open " + path);
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = r.png ? png_create_info_struct(r.png) : nullptr;
    if (!r.png || !r.info)
        throw std::runtime_error("read_png_gray16: libpng init failed");
    if (setjmp(png_jmpbuf(r.png)))
        throw std::runtime_error("read_png_gray16: libpng error reading " + path);
    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);
    png_set_expand(r.png);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY)
        png_set_rgb_to_gray_fixed(r.png, 1, -1, -1);
    png_set_swap(r.png);
    png_read_update_info(r.png, r.info);
    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    const int depth = png_get_bit_depth(r.png, r.info);
    Image<double> image(w, h);
    if (depth == 16)
    {
        std::vector<uint16_t> data(static_cast<size_t>(w) * h);
        std::vector<png_bytep> rows(h);
        for (int y = 0; y < h; ++y)
            rows[y] = reinterpret_cast<png_bytep>(data.data() + static_cast<size_t>(y) * w);
        png_read_image(r.png, rows.data());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                image.at(x, y) = data[static_cast<size_t>(y) * w + x] / 65535.0;
    }
    else
    {
        std::vector<uint8_t> data(static_cast<size_t>(w) * h);
        std::vector<png_bytep> rows(h);
        for (int y = 0; y < h; ++y)
            rows[y] = data.data() + static_cast<size_t>(y) * w;
        png_read_image(r.png, rows.data());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                image.at(x, y) = data[static_cast<size_t>(y) * w + x] / 255.0;
    }
    return image;
}

void export_render_buffer(const RenderBuffer& buffer, const std::string& prefix)
{
    write_png_rgb(buffer.color, prefix + "_color.png");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int y = 0; y < buffer.height; ++y)
        for (int x = 0; x < buffer.width; ++x)
            if (buffer.is_foreground(x, y))
            {
                lo = std::min(lo, buffer.depth.at(x, y));
                hi = std::max(hi, buffer.depth.at(x, y));
            }
    const bool any = std::isfinite(lo);
    if (!any)
    {
        lo = 0.0;
        hi = 1.0;
    }
    const double span = hi > lo ? hi - lo : 1.0;
    Image<double> depth01(buffer.width, buffer.height, 0.0);
    for (int y = 0; y < buffer.height; ++y)
        for (int x = 0; x < buffer.width; ++x)
            if (buffer.is_foreground(x, y))
                depth01.at(x, y) = (buffer.depth.at(x, y) - lo) / span;
    write_png_gray16(depth01, prefix + "_depth.png");

    nlohmann::json sidecar;
    sidecar["depth_min"] = lo;
    sidecar["depth_max"] = hi;
    sidecar["background"] = "zero";
    std::ofstream side(prefix + "_depth.json");
    side << sidecar.dump(2) << "\n";

    std::ofstream tri(prefix + "_tri.u32", std::ios::binary);
    if (!tri)
        throw std::runtime_error("export_render_buffer: cannot open " + prefix + "_tri.u32");
    const uint32_t wh[2] = {static_cast<uint32_t>(buffer.width),
                            static_cast<uint32_t>(buffer.height)};
    tri.write(reinterpret_cast<const char*>(wh), 8);
    for (int y = 0; y < buffer.height; ++y)
        for (int x = 0; x < buffer.width; ++x)
        {
            const uint32_t v = static_cast<uint32_t>(buffer.tri_index.at(x, y));
            tri.write(reinterpret_cast<const char*>(&v), 4);
        }
}

} // namespace facekit
