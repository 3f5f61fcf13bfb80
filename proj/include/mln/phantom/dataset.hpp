#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mln/core/image.hpp"

namespace mln::phantom {

// Layout: <root>/<split>/images/<stem>.png and <root>/<split>/masks/<stem>.png.
// Pairs are matched by filename stem; a missing mask is a load error.
std::vector<std::pair<core::Image, core::Mask>> load_dataset(const std::string& root,
                                                             const std::string& split);

// Stems in sorted order, for callers that need stable case ids.
std::vector<std::string> dataset_stems(const std::string& root, const std::string& split);

void save_pair(const std::string& root, const std::string& split, const std::string& stem,
               const core::Image& image, const core::Mask& mask, int bit_depth = 16);

}  // namespace mln::phantom
