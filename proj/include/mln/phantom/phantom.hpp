#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mln/core/image.hpp"

namespace mln::phantom {

using core::Image;
using core::Mask;

// Post-render intensity transform emulating acquisition differences
// (pixel-mapping conventions of different scanners/protocols).
struct ModalityMapping {
    enum class Kind { Identity, Gamma, Invert, Bezier };
    Kind kind = Kind::Identity;
    double gamma = 1.0;                      // Kind::Gamma
    double p1x = 0.0, p1y = 0.0, p2x = 0.0, p2y = 0.0;  // Kind::Bezier control points

    static ModalityMapping identity() { return {}; }
    static ModalityMapping gamma_map(double g) { return {Kind::Gamma, g, 0, 0, 0, 0}; }
    static ModalityMapping invert() { return {Kind::Invert, 1.0, 0, 0, 0, 0}; }
    static ModalityMapping bezier(double ax, double ay, double bx, double by) {
        return {Kind::Bezier, 1.0, ax, ay, bx, by};
    }
};

struct PhantomConfig {
    uint64_t seed = 0;
    int canvas_height = 128;
    int canvas_width = 128;
    int n_clusters = 1;
    int spots_per_cluster_min = 5;
    int spots_per_cluster_max = 20;
    double spot_sigma_min_px = 1.0;
    double spot_sigma_max_px = 3.0;
    double cluster_radius_px = 12.0;
    double background_texture_scale = 16.0;
    ModalityMapping modality_mapping;

    void validate() const;  // throws ConfigError naming the offending field
};

// Pure function of (seed, config): textured background plus clustered
// Gaussian bright spots. The mask marks pixels where some spot's
// contribution exceeds half that spot's peak amplitude, evaluated before the
// modality mapping. Output intensities are quantized to 1/65536 steps so the
// value set is closed under v -> 1-v (emulates a 16-bit detector).
std::pair<Image, Mask> generate_phantom(const PhantomConfig& config);

// Splits into four equal quadrants (reflect-padding odd inputs to even),
// drops quadrants whose fraction of pixels above the global minimum
// intensity falls below `foreground_threshold`, and resamples survivors to
// working_size (bilinear image, nearest-neighbor mask).
std::vector<std::pair<Image, Mask>> preprocess_tile(const Image& image, const Mask& mask,
                                                    double foreground_threshold,
                                                    int working_size = 128);

// Resampling helpers shared with augmentation.
Image resize_bilinear(const Image& img, int out_h, int out_w);
Mask resize_nearest(const Mask& mask, int out_h, int out_w);

}  // namespace mln::phantom
