#pragma once

#include <string>
#include <vector>

#include "mln/core/errors.hpp"

namespace mln::net {

// U-shaped windowed-attention backbone configuration. The last stage acts as
// the bottleneck; every normalization site carries one parameter set per
// domain.
struct NetConfig {
    int input_h = 128;
    int input_w = 128;
    int patch_size = 4;
    int embed_dim = 24;                 // toy default; 96 at full scale
    std::vector<int> depths = {2, 2, 2};
    std::vector<int> heads = {3, 6, 12};
    int window_size = 8;
    int num_classes = 2;
    int num_domains = 4;
    int mlp_ratio = 4;
    bool rel_pos_bias = true;
    std::string decoder_upsample = "expand";  // "expand" | "bilinear"
    double ln_delta = 1e-5;

    int stages() const { return static_cast<int>(depths.size()); }
    int stage_dim(int s) const { return embed_dim << s; }
    int stage_grid(int s) const { return (input_h / patch_size) >> s; }

    // Window size actually used at a stage: clamped to the token grid.
    int effective_window(int s) const {
        const int g = stage_grid(s);
        return window_size < g ? window_size : g;
    }

    void validate() const;

    std::string to_json() const;
    static NetConfig from_json(const std::string& text);
};

}  // namespace mln::net
