#include "mln/io/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>

#include "mln/core/errors.hpp"

namespace mln::io {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

core::Image read_png_gray(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open PNG: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("PNG decode error: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (color_type != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("non-grayscale PNG: " + path);
    }
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (bit_depth == 16) png_set_swap(png);  // libpng delivers big-endian 16-bit
    png_read_update_info(png, info);

    const int out_depth = bit_depth == 16 ? 16 : 8;
    const double denom = out_depth == 16 ? 65535.0 : 255.0;
    const size_t stride = static_cast<size_t>(width) * (out_depth / 8);

    std::vector<uint8_t> row(stride);
    core::Image img(static_cast<int>(height), static_cast<int>(width));
    for (png_uint_32 y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < width; ++x) {
            uint32_t v;
            if (out_depth == 16) {
                v = static_cast<uint32_t>(row[2 * x]) | (static_cast<uint32_t>(row[2 * x + 1]) << 8);
            } else {
                v = row[x];
            }
            img.at(static_cast<int>(y), static_cast<int>(x)) = static_cast<float>(v / denom);
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

namespace {

void write_png_common(const std::string& path, int height, int width, int bit_depth,
                      int color_type, const std::function<void(png_structp, int)>& write_row) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot write PNG: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG encode error: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    for (int y = 0; y < height; ++y) write_row(png, y);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray(const std::string& path, const core::Image& img, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16)
        throw ConfigError("write_png_gray: bit_depth must be 8 or 16");
    const double denom = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<uint8_t> row8(static_cast<size_t>(img.width));
    std::vector<uint16_t> row16(static_cast<size_t>(img.width));
    write_png_common(path, img.height, img.width, bit_depth, PNG_COLOR_TYPE_GRAY,
                     [&](png_structp png, int y) {
                         for (int x = 0; x < img.width; ++x) {
                             const double v = std::min(1.0, std::max(0.0, static_cast<double>(img.at(y, x))));
                             const uint32_t q = static_cast<uint32_t>(std::lround(v * denom));
                             if (bit_depth == 8)
                                 row8[static_cast<size_t>(x)] = static_cast<uint8_t>(q);
                             else
                                 row16[static_cast<size_t>(x)] = static_cast<uint16_t>(q);
                         }
                         png_write_row(png, bit_depth == 8
                                                ? reinterpret_cast<png_bytep>(row8.data())
                                                : reinterpret_cast<png_bytep>(row16.data()));
                     });
}

void write_png_mask(const std::string& path, const core::Mask& mask) {
    std::vector<uint8_t> row(static_cast<size_t>(mask.width));
    write_png_common(path, mask.height, mask.width, 8, PNG_COLOR_TYPE_GRAY,
                     [&](png_structp png, int y) {
                         for (int x = 0; x < mask.width; ++x)
                             row[static_cast<size_t>(x)] = mask.at(y, x) ? 255 : 0;
                         png_write_row(png, row.data());
                     });
}

core::Mask read_png_mask(const std::string& path) {
    const core::Image img = read_png_gray(path);
    core::Mask mask(img.height, img.width, 0, img.spacing);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        mask.pixels[i] = img.pixels[i] > 0.5f ? 1 : 0;
    return mask;
}

RgbCanvas::RgbCanvas(int h, int w, uint8_t r, uint8_t g, uint8_t b)
    : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3) {
    for (size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = r;
        pixels[i + 1] = g;
        pixels[i + 2] = b;
    }
}

void RgbCanvas::set(int y, int x, uint8_t r, uint8_t g, uint8_t b) {
    if (y < 0 || y >= height || x < 0 || x >= width) return;
    const size_t i = (static_cast<size_t>(y) * width + x) * 3;
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
}

void RgbCanvas::line(int y0, int x0, int y1, int x1, uint8_t r, uint8_t g, uint8_t b) {
    // Bresenham
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        set(y0, x0, r, g, b);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void RgbCanvas::fill_rect(int y0, int x0, int y1, int x1, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = std::max(0, y0); y <= std::min(height - 1, y1); ++y)
        for (int x = std::max(0, x0); x <= std::min(width - 1, x1); ++x) set(y, x, r, g, b);
}

void write_png_rgb(const std::string& path, const RgbCanvas& canvas) {
    write_png_common(path, canvas.height, canvas.width, 8, PNG_COLOR_TYPE_RGB,
                     [&](png_structp png, int y) {
                         png_write_row(png, const_cast<png_bytep>(
                                                canvas.pixels.data() +
                                                static_cast<size_t>(y) * canvas.width * 3));
                     });
}

}  // namespace mln::io
