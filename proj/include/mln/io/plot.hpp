#pragma once

#include <string>
#include <vector>

#include "mln/io/png_io.hpp"

namespace mln::io {

// One curve for line_plot.
struct Series {
    std::string label;
    std::vector<double> values;  // x is the index
};

// Renders simple axis-aligned line plots (training curves). File-based only.
void line_plot(const std::string& path, const std::vector<Series>& series,
               int height = 360, int width = 640);

// Renders a bar histogram of `counts`; bins span [0,1] left to right.
void histogram_plot(const std::string& path, const std::vector<uint64_t>& counts,
                    int height = 240, int width = 512);

// Tiles images left-to-right, top-to-bottom into one preview sheet.
void montage(const std::string& path, const std::vector<core::Image>& images, int columns);

}  // namespace mln::io
