#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mln/core/image.hpp"

namespace mln::io {

// Grayscale PNG loading. 8- and 16-bit single-channel files are accepted;
// intensities are normalized by the type maximum (255 or 65535).
core::Image read_png_gray(const std::string& path);

// Writes an 8-bit (default) or 16-bit grayscale PNG; v -> round(v * max).
void write_png_gray(const std::string& path, const core::Image& img, int bit_depth = 8);

void write_png_mask(const std::string& path, const core::Mask& mask);
core::Mask read_png_mask(const std::string& path);  // binarized at 0.5

// 8-bit RGB canvas used by the plot helpers.
struct RgbCanvas {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pixels;  // 3 bytes per pixel, row-major

    RgbCanvas(int h, int w, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255);
    void set(int y, int x, uint8_t r, uint8_t g, uint8_t b);
    void line(int y0, int x0, int y1, int x1, uint8_t r, uint8_t g, uint8_t b);
    void fill_rect(int y0, int x0, int y1, int x1, uint8_t r, uint8_t g, uint8_t b);
};

void write_png_rgb(const std::string& path, const RgbCanvas& canvas);

}  // namespace mln::io
