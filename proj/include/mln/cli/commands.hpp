#pragma once

#include <string>
#include <vector>

#include "mln/core/image.hpp"

namespace mln::cli {

// Entry point shared by the binary and the tests. Returns the process exit
// code (0 ok, 2 config, 3 data, 4 integrity, 5 numeric).
int run(const std::vector<std::string>& args);

// Pixel-value histogram over (0,1): values exactly 0 or 1 are excluded from
// the counts (they are background/saturation in this pipeline).
std::vector<uint64_t> intensity_histogram(const std::vector<core::Image>& images, int bins);

}  // namespace mln::cli
