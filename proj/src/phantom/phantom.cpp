#include "mln/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mln/augment/bezier.hpp"
#include "mln/core/rng.hpp"

namespace mln::phantom {

namespace {

constexpr double kQuantLevels = 65536.0;

double quantize16(double v) {
    return std::round(std::clamp(v, 0.0, 1.0) * kQuantLevels) / kQuantLevels;
}

// Smooth value noise: a coarse random grid interpolated bilinearly.
std::vector<double> value_noise(core::Rng& rng, int h, int w, double cell_px) {
    const int gh = std::max(2, static_cast<int>(std::ceil(h / cell_px)) + 1);
    const int gw = std::max(2, static_cast<int>(std::ceil(w / cell_px)) + 1);
    std::vector<double> grid(static_cast<size_t>(gh) * gw);
    for (double& v : grid) v = rng.uniform();
    std::vector<double> out(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const double gy = y / cell_px;
        const int iy = std::min(gh - 2, static_cast<int>(gy));
        const double fy = gy - iy;
        for (int x = 0; x < w; ++x) {
            const double gx = x / cell_px;
            const int ix = std::min(gw - 2, static_cast<int>(gx));
            const double fx = gx - ix;
            const double v00 = grid[static_cast<size_t>(iy) * gw + ix];
            const double v01 = grid[static_cast<size_t>(iy) * gw + ix + 1];
            const double v10 = grid[static_cast<size_t>(iy + 1) * gw + ix];
            const double v11 = grid[static_cast<size_t>(iy + 1) * gw + ix + 1];
            out[static_cast<size_t>(y) * w + x] =
                (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
        }
    }
    return out;
}

double apply_modality(const ModalityMapping& m, double v, const augment::IntensityLUT* lut) {
    switch (m.kind) {
        case ModalityMapping::Kind::Identity:
            return v;
        case ModalityMapping::Kind::Gamma:
            return std::pow(std::clamp(v, 0.0, 1.0), m.gamma);
        case ModalityMapping::Kind::Invert:
            return 1.0 - v;
        case ModalityMapping::Kind::Bezier:
            return lut->lookup(v);
    }
    return v;
}

}  // namespace

void PhantomConfig::validate() const {
    if (canvas_height < 16 || canvas_width < 16)
        throw ConfigError("PhantomConfig.canvas: height and width must be >= 16");
    if (n_clusters < 1) throw ConfigError("PhantomConfig.n_clusters: must be >= 1");
    if (spots_per_cluster_min < 1 || spots_per_cluster_max < spots_per_cluster_min)
        throw ConfigError("PhantomConfig.spots_per_cluster: need 1 <= min <= max");
    if (spot_sigma_min_px <= 0.0 || spot_sigma_max_px < spot_sigma_min_px)
        throw ConfigError("PhantomConfig.spot_sigma_px: need 0 < min <= max");
    if (cluster_radius_px <= 0.0)
        throw ConfigError("PhantomConfig.cluster_radius_px: must be > 0");
    if (background_texture_scale <= 0.0)
        throw ConfigError("PhantomConfig.background_texture_scale: must be > 0");
    if (modality_mapping.kind == ModalityMapping::Kind::Gamma && modality_mapping.gamma <= 0.0)
        throw ConfigError("PhantomConfig.modality_mapping: gamma must be > 0");
}

std::pair<Image, Mask> generate_phantom(const PhantomConfig& config) {
    config.validate();
    const int h = config.canvas_height, w = config.canvas_width;
    core::Rng rng(core::derive_seed(config.seed, 0x7068616eull));

    // Background: low-frequency texture in [0.10, 0.45] plus a mild gradient.
    std::vector<double> bg = value_noise(rng, h, w, config.background_texture_scale);
    const double gx = rng.uniform(-0.05, 0.05);
    const double gy = rng.uniform(-0.05, 0.05);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = 0.10 + 0.30 * bg[static_cast<size_t>(y) * w + x];
            v += gx * (static_cast<double>(x) / w - 0.5) + gy * (static_cast<double>(y) / h - 0.5);
            bg[static_cast<size_t>(y) * w + x] = std::clamp(v, 0.02, 0.6);
        }

    struct Spot {
        double cy, cx, sigma, amp;
    };
    std::vector<Spot> spots;
    const double margin = config.cluster_radius_px + 3.0 * config.spot_sigma_max_px;
    for (int c = 0; c < config.n_clusters; ++c) {
        const double ccy = rng.uniform(margin, h - margin);
        const double ccx = rng.uniform(margin, w - margin);
        const int n = config.spots_per_cluster_min +
                      static_cast<int>(rng.uniform_int(static_cast<uint64_t>(
                          config.spots_per_cluster_max - config.spots_per_cluster_min + 1)));
        for (int s = 0; s < n; ++s) {
            Spot sp;
            sp.cy = ccy + rng.normal(0.0, config.cluster_radius_px / 2.0);
            sp.cx = ccx + rng.normal(0.0, config.cluster_radius_px / 2.0);
            sp.sigma = rng.uniform(config.spot_sigma_min_px, config.spot_sigma_max_px);
            sp.amp = rng.uniform(0.30, 0.50);
            spots.push_back(sp);
        }
    }

    Image img(h, w);
    Mask mask(h, w);
    std::unique_ptr<augment::IntensityLUT> lut;
    if (config.modality_mapping.kind == ModalityMapping::Kind::Bezier) {
        augment::BezierControl ctrl{{config.modality_mapping.p1x, config.modality_mapping.p1y},
                                    {config.modality_mapping.p2x, config.modality_mapping.p2y}};
        lut = std::make_unique<augment::IntensityLUT>(augment::build_intensity_lut(ctrl));
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double lesion = 0.0;
            bool in_mask = false;
            for (const Spot& sp : spots) {
                const double dy = y - sp.cy, dx = x - sp.cx;
                const double r2 = dy * dy + dx * dx;
                if (r2 > 25.0 * sp.sigma * sp.sigma) continue;
                const double contrib = sp.amp * std::exp(-0.5 * r2 / (sp.sigma * sp.sigma));
                lesion += contrib;
                if (contrib > 0.5 * sp.amp) in_mask = true;
            }
            const double pre = std::min(1.0, bg[static_cast<size_t>(y) * w + x] + lesion);
            const double post = apply_modality(config.modality_mapping, pre, lut.get());
            img.at(y, x) = static_cast<float>(quantize16(post));
            mask.at(y, x) = in_mask ? 1 : 0;
        }
    }
    return {std::move(img), std::move(mask)};
}

namespace {

// Reflect-pad by one row/column on the bottom/right to reach even dimensions.
template <typename T, typename Buf>
void pad_to_even(Buf& buf, int& h, int& w) {
    if (w % 2 == 1) {
        Buf out(static_cast<size_t>(h) * (w + 1));
        for (int y = 0; y < h; ++y) {
            std::copy_n(buf.begin() + static_cast<size_t>(y) * w, w,
                        out.begin() + static_cast<size_t>(y) * (w + 1));
            out[static_cast<size_t>(y) * (w + 1) + w] = buf[static_cast<size_t>(y) * w + (w - 2 >= 0 ? w - 2 : 0)];
        }
        buf = std::move(out);
        ++w;
    }
    if (h % 2 == 1) {
        buf.resize(static_cast<size_t>(h + 1) * w);
        const int src = h - 2 >= 0 ? h - 2 : 0;
        std::copy_n(buf.begin() + static_cast<size_t>(src) * w, w,
                    buf.begin() + static_cast<size_t>(h) * w);
        ++h;
    }
}

}  // namespace

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    Image out(out_h, out_w, 0.0f, img.spacing * img.height / out_h);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            const double v = (1 - wy) * ((1 - wx) * img.at(y0, x0) + wx * img.at(y0, x1)) +
                             wy * ((1 - wx) * img.at(y1, x0) + wx * img.at(y1, x1));
            out.at(y, x) = static_cast<float>(v);
        }
    }
    return out;
}

Mask resize_nearest(const Mask& mask, int out_h, int out_w) {
    Mask out(out_h, out_w, 0, mask.spacing * mask.height / out_h);
    const double sy = static_cast<double>(mask.height) / out_h;
    const double sx = static_cast<double>(mask.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const int iy = std::min(mask.height - 1, static_cast<int>((y + 0.5) * sy));
        for (int x = 0; x < out_w; ++x) {
            const int ix = std::min(mask.width - 1, static_cast<int>((x + 0.5) * sx));
            out.at(y, x) = mask.at(iy, ix);
        }
    }
    return out;
}

std::vector<std::pair<Image, Mask>> preprocess_tile(const Image& image, const Mask& mask,
                                                    double foreground_threshold,
                                                    int working_size) {
    if (image.height < 2 || image.width < 2)
        throw ShapeError("preprocess_tile: image must be at least 2x2");
    if (foreground_threshold < 0.0 || foreground_threshold >= 1.0)
        throw ConfigError("preprocess_tile: foreground_threshold must be in [0,1)");
    core::require_same_shape(image, mask, "preprocess_tile");

    std::vector<float> px = image.pixels;
    std::vector<uint8_t> mx = mask.pixels;
    int h = image.height, w = image.width;
    pad_to_even<float>(px, h, w);
    {
        int mh = mask.height, mw = mask.width;
        pad_to_even<uint8_t>(mx, mh, mw);
    }

    const float global_min = *std::min_element(px.begin(), px.end());
    const int qh = h / 2, qw = w / 2;
    std::vector<std::pair<Image, Mask>> out;
    for (int qy = 0; qy < 2; ++qy) {
        for (int qx = 0; qx < 2; ++qx) {
            Image tile(qh, qw, 0.0f, image.spacing);
            Mask mtile(qh, qw, 0, mask.spacing);
            size_t above = 0;
            for (int y = 0; y < qh; ++y)
                for (int x = 0; x < qw; ++x) {
                    const float v = px[static_cast<size_t>(qy * qh + y) * w + (qx * qw + x)];
                    tile.at(y, x) = v;
                    mtile.at(y, x) = mx[static_cast<size_t>(qy * qh + y) * w + (qx * qw + x)];
                    if (v > global_min) ++above;
                }
            const double frac = static_cast<double>(above) / (static_cast<double>(qh) * qw);
            if (frac < foreground_threshold) continue;
            out.emplace_back(resize_bilinear(tile, working_size, working_size),
                             resize_nearest(mtile, working_size, working_size));
        }
    }
    return out;
}

}  // namespace mln::phantom
