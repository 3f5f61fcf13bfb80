#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mln/augment/bezier.hpp"
#include "mln/core/image.hpp"

namespace mln::augment {

using core::Image;
using core::Mask;

// One labeled variant produced by domain expansion.
struct DomainSample {
    Image image;
    Mask mask;
    int domain = 0;
};

// A per-domain intensity transform. Bezier remaps keep the variant close to
// the source distribution; inversion produces the dissimilar variant.
struct DomainDef {
    enum class Kind { Identity, Bezier, Invert, InvertBezier };
    Kind kind = Kind::Identity;
    BezierControl ctrl;  // Bezier / InvertBezier

    std::string kind_name() const;
};

using DomainSpec = std::vector<DomainDef>;

// [identity, bezier((0.30,0.70),(0.70,0.30)), bezier((0.70,0.30),(0.30,0.70)), invert]
DomainSpec default_domain_spec();

// Alternative spec generators for the hyperparameter ablation: "mean" places
// pair n at a_n = 0.5*n/N; "random" draws a uniformly from (0, 0.5). Each
// pair a yields the curve ((a,1-a),(1-a,a)) and its swap. Identity and
// inversion domains are always included.
DomainSpec mean_strategy_spec(int n_pairs);
DomainSpec random_strategy_spec(int n_pairs, uint64_t seed);

// JSON (de)serialization of specs; see the CLI for the wire format.
DomainSpec parse_domain_spec_json(const std::string& json_text);
std::string domain_spec_to_json(const DomainSpec& spec);

// g = T - f, pixelwise. T must be at least the image maximum (default 1.0
// for normalized images).
Image grayscale_invert(const Image& image, double T = 1.0);

// Per-pixel LUT application with linear interpolation between entries.
Image apply_lut(const Image& image, const IntensityLUT& lut);

// Expands one sample into len(spec) labeled variants sharing the mask.
std::vector<DomainSample> expand_domains(const Image& image, const Mask& mask,
                                         const DomainSpec& spec);

// Random flips plus crop-and-resize within scale [0.8, 1.0], applied
// identically to image and mask (nearest-neighbor for the mask).
// Deterministic in seed.
DomainSample conventional_augment(const Image& image, const Mask& mask, uint64_t seed);

}  // namespace mln::augment
