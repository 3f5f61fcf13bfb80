#include "mln/io/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mln::io {

namespace {

constexpr int kMargin = 24;

struct Palette {
    uint8_t r, g, b;
};
constexpr Palette kColors[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
    {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
};

}  // namespace

void line_plot(const std::string& path, const std::vector<Series>& series, int height, int width) {
    RgbCanvas canvas(height, width);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    size_t max_n = 0;
    for (const auto& s : series) {
        max_n = std::max(max_n, s.values.size());
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (max_n == 0 || !std::isfinite(lo)) {
        write_png_rgb(path, canvas);
        return;
    }
    if (hi - lo < 1e-12) {
        hi = lo + 1.0;
    }
    const int x0 = kMargin, x1 = width - kMargin;
    const int y0 = kMargin, y1 = height - kMargin;
    canvas.line(y1, x0, y1, x1, 0, 0, 0);
    canvas.line(y0, x0, y1, x0, 0, 0, 0);
    // light horizontal grid at quartiles
    for (int q = 1; q <= 3; ++q) {
        const int y = y0 + (y1 - y0) * q / 4;
        canvas.line(y, x0, y, x1, 220, 220, 220);
    }
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& vals = series[si].values;
        if (vals.empty()) continue;
        const Palette c = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
        int py = 0, px = 0;
        for (size_t i = 0; i < vals.size(); ++i) {
            const double fx = max_n > 1 ? static_cast<double>(i) / (max_n - 1) : 0.0;
            const double fy = (vals[i] - lo) / (hi - lo);
            const int x = x0 + static_cast<int>(fx * (x1 - x0));
            const int y = y1 - static_cast<int>(fy * (y1 - y0));
            if (i > 0) canvas.line(py, px, y, x, c.r, c.g, c.b);
            py = y;
            px = x;
        }
        // legend swatch
        canvas.fill_rect(4 + static_cast<int>(si) * 10, 4, 10 + static_cast<int>(si) * 10, 18,
                         c.r, c.g, c.b);
    }
    write_png_rgb(path, canvas);
}

void histogram_plot(const std::string& path, const std::vector<uint64_t>& counts, int height,
                    int width) {
    RgbCanvas canvas(height, width);
    const int x0 = kMargin, x1 = width - kMargin;
    const int y0 = kMargin, y1 = height - kMargin;
    canvas.line(y1, x0, y1, x1, 0, 0, 0);
    canvas.line(y0, x0, y1, x0, 0, 0, 0);
    uint64_t peak = 0;
    for (uint64_t c : counts) peak = std::max(peak, c);
    if (peak == 0 || counts.empty()) {
        write_png_rgb(path, canvas);
        return;
    }
    const size_t n = counts.size();
    for (size_t i = 0; i < n; ++i) {
        const int bx0 = x0 + static_cast<int>(static_cast<double>(i) / n * (x1 - x0));
        const int bx1 = x0 + static_cast<int>(static_cast<double>(i + 1) / n * (x1 - x0)) - 1;
        const double f = static_cast<double>(counts[i]) / static_cast<double>(peak);
        const int by = y1 - static_cast<int>(f * (y1 - y0));
        canvas.fill_rect(by, bx0, y1 - 1, std::max(bx0, bx1), 70, 130, 180);
    }
    write_png_rgb(path, canvas);
}

void montage(const std::string& path, const std::vector<core::Image>& images, int columns) {
    if (images.empty()) {
        write_png_rgb(path, RgbCanvas(16, 16));
        return;
    }
    columns = std::max(1, columns);
    const int rows = static_cast<int>((images.size() + columns - 1) / columns);
    const int cell_h = images[0].height, cell_w = images[0].width;
    const int pad = 2;
    RgbCanvas canvas(rows * (cell_h + pad) + pad, columns * (cell_w + pad) + pad, 40, 40, 40);
    for (size_t i = 0; i < images.size(); ++i) {
        const int r = static_cast<int>(i) / columns;
        const int c = static_cast<int>(i) % columns;
        const int oy = pad + r * (cell_h + pad);
        const int ox = pad + c * (cell_w + pad);
        const auto& img = images[i];
        for (int y = 0; y < std::min(cell_h, img.height); ++y)
            for (int x = 0; x < std::min(cell_w, img.width); ++x) {
                const auto v = static_cast<uint8_t>(
                    std::lround(std::clamp(img.at(y, x), 0.0f, 1.0f) * 255.0f));
                canvas.set(oy + y, ox + x, v, v, v);
            }
    }
    write_png_rgb(path, canvas);
}

}  // namespace mln::io
