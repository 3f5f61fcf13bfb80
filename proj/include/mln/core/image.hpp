#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mln/core/errors.hpp"

namespace mln::core {

// 2-D grayscale image, intensities in [0, 1], row-major.
struct Image {
    int height = 0;
    int width = 0;
    double spacing = 1.0;  // mm per pixel
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, float fill = 0.0f, double sp = 1.0)
        : height(h), width(w), spacing(sp), pixels(static_cast<size_t>(h) * w, fill) {}

    float& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }

    float max_pixel() const {
        float m = 0.0f;
        for (float v : pixels) m = std::max(m, v);
        return m;
    }
    float min_pixel() const {
        float m = pixels.empty() ? 0.0f : pixels[0];
        for (float v : pixels) m = std::min(m, v);
        return m;
    }

    void validate(const std::string& who) const {
        if (pixels.size() != static_cast<size_t>(height) * width)
            throw ShapeError(who + ": pixel buffer does not match height*width");
        for (float v : pixels) {
            if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
                throw NumericError(who + ": pixel outside [0,1] or non-finite");
        }
    }
};

// Binary annotation paired with an Image; values are exactly 0 or 1.
struct Mask {
    int height = 0;
    int width = 0;
    double spacing = 1.0;
    std::vector<uint8_t> pixels;

    Mask() = default;
    Mask(int h, int w, uint8_t fill = 0, double sp = 1.0)
        : height(h), width(w), spacing(sp), pixels(static_cast<size_t>(h) * w, fill) {}

    uint8_t& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }

    size_t foreground_count() const {
        size_t n = 0;
        for (uint8_t v : pixels) n += v;
        return n;
    }
};

inline void require_same_shape(const Image& img, const Mask& mask, const std::string& who) {
    if (img.height != mask.height || img.width != mask.width)
        throw ShapeError(who + ": image and mask shapes differ");
}

inline void require_same_shape(const Mask& a, const Mask& b, const std::string& who) {
    if (a.height != b.height || a.width != b.width)
        throw ShapeError(who + ": mask shapes differ");
}

}  // namespace mln::core
