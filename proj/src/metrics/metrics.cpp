#include "mln/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mln::metrics {

ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
    core::require_same_shape(pred, gt, "confusion");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.pixels.size(); ++i) {
        const bool p = pred.pixels[i] != 0;
        const bool g = gt.pixels[i] != 0;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

std::optional<double> tpr(const ConfusionCounts& c) {
    const int64_t den = c.tp + c.fn;
    if (den == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(den);
}

std::optional<double> precision(const ConfusionCounts& c) {
    const int64_t den = c.tp + c.fp;
    if (den == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(den);
}

std::optional<double> dsc(const ConfusionCounts& c) {
    const int64_t den = 2 * c.tp + c.fp + c.fn;
    if (den == 0) return std::nullopt;
    return static_cast<double>(2 * c.tp) / static_cast<double>(den);
}

SurfaceSet extract_surface(const Mask& mask) {
    SurfaceSet s;
    s.spacing = mask.spacing;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(y, x)) continue;
            const bool boundary = y == 0 || x == 0 || y == mask.height - 1 ||
                                  x == mask.width - 1 || !mask.at(y - 1, x) ||
                                  !mask.at(y + 1, x) || !mask.at(y, x - 1) || !mask.at(y, x + 1);
            if (boundary) s.points.emplace_back(y, x);
        }
    }
    return s;
}

std::vector<int64_t> squared_edt(const std::vector<std::pair<int, int>>& seeds, int h, int w) {
    // Felzenszwalb-Huttenlocher: exact squared Euclidean distances.
    const int64_t inf1 = h + w + 2;  // dominates any in-grid distance after squaring
    std::vector<int64_t> coldist(static_cast<size_t>(h) * w, inf1);
    for (const auto& [sy, sx] : seeds) coldist[static_cast<size_t>(sy) * w + sx] = 0;
    for (int x = 0; x < w; ++x) {
        for (int y = 1; y < h; ++y) {
            auto& d = coldist[static_cast<size_t>(y) * w + x];
            d = std::min(d, coldist[static_cast<size_t>(y - 1) * w + x] + 1);
        }
        for (int y = h - 2; y >= 0; --y) {
            auto& d = coldist[static_cast<size_t>(y) * w + x];
            d = std::min(d, coldist[static_cast<size_t>(y + 1) * w + x] + 1);
        }
    }
    std::vector<int64_t> out(static_cast<size_t>(h) * w);
    std::vector<int> v(static_cast<size_t>(w));
    std::vector<double> z(static_cast<size_t>(w) + 1);
    std::vector<int64_t> f(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int64_t d = coldist[static_cast<size_t>(y) * w + x];
            f[static_cast<size_t>(x)] = d * d;
        }
        int k = 0;
        v[0] = 0;
        z[0] = -std::numeric_limits<double>::infinity();
        z[1] = std::numeric_limits<double>::infinity();
        for (int q = 1; q < w; ++q) {
            double s;
            for (;;) {
                const int p = v[static_cast<size_t>(k)];
                s = (static_cast<double>(f[static_cast<size_t>(q)] - f[static_cast<size_t>(p)]) +
                     static_cast<double>(static_cast<int64_t>(q) * q - static_cast<int64_t>(p) * p)) /
                    (2.0 * (q - p));
                if (s > z[static_cast<size_t>(k)]) break;
                --k;
            }
            ++k;
            v[static_cast<size_t>(k)] = q;
            z[static_cast<size_t>(k)] = s;
            z[static_cast<size_t>(k) + 1] = std::numeric_limits<double>::infinity();
        }
        k = 0;
        for (int x = 0; x < w; ++x) {
            while (z[static_cast<size_t>(k) + 1] < x) ++k;
            const int64_t dx = x - v[static_cast<size_t>(k)];
            out[static_cast<size_t>(y) * w + x] = dx * dx + f[static_cast<size_t>(v[static_cast<size_t>(k)])];
        }
    }
    return out;
}

namespace {

struct DirectedSums {
    double sum_sqrt = 0.0;   // sum over points of sqrt(d^2), pixel units
    int64_t max_sq = 0;      // max squared distance
    int64_t count = 0;
};

// Distances from each point of `from` to the nearest point of `to`.
DirectedSums directed_distances(const SurfaceSet& from, const SurfaceSet& to) {
    int h = 0, w = 0;
    for (const auto& [y, x] : from.points) {
        h = std::max(h, y + 1);
        w = std::max(w, x + 1);
    }
    for (const auto& [y, x] : to.points) {
        h = std::max(h, y + 1);
        w = std::max(w, x + 1);
    }
    const std::vector<int64_t> edt = squared_edt(to.points, h, w);
    DirectedSums s;
    for (const auto& [y, x] : from.points) {
        const int64_t d2 = edt[static_cast<size_t>(y) * w + x];
        s.sum_sqrt += std::sqrt(static_cast<double>(d2));
        s.max_sq = std::max(s.max_sq, d2);
        ++s.count;
    }
    return s;
}

}  // namespace

std::optional<double> asd(const SurfaceSet& P, const SurfaceSet& G, bool directed) {
    if (P.empty() && G.empty()) return 0.0;
    if (P.empty() || G.empty()) return std::nullopt;
    const DirectedSums pg = directed_distances(P, G);
    if (directed)
        return P.spacing * (pg.sum_sqrt / static_cast<double>(pg.count));
    const DirectedSums gp = directed_distances(G, P);
    return P.spacing * ((pg.sum_sqrt + gp.sum_sqrt) / static_cast<double>(pg.count + gp.count));
}

std::optional<double> hd(const SurfaceSet& P, const SurfaceSet& G) {
    if (P.empty() && G.empty()) return 0.0;
    if (P.empty() || G.empty()) return std::nullopt;
    const DirectedSums pg = directed_distances(P, G);
    const DirectedSums gp = directed_distances(G, P);
    return P.spacing * std::sqrt(static_cast<double>(std::max(pg.max_sq, gp.max_sq)));
}

CaseMetrics evaluate_case(const Mask& pred, const Mask& gt, double spacing_mm) {
    CaseMetrics m;
    const ConfusionCounts c = confusion(pred, gt);
    m.tpr = tpr(c);
    m.precision = precision(c);
    m.dsc = dsc(c);
    SurfaceSet P = extract_surface(pred);
    SurfaceSet G = extract_surface(gt);
    P.spacing = spacing_mm;
    G.spacing = spacing_mm;
    m.hd_mm = hd(P, G);
    m.asd_mm = asd(P, G);
    return m;
}

}  // namespace mln::metrics
