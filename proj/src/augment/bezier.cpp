#include "mln/augment/bezier.hpp"

#include <algorithm>
#include <cmath>

namespace mln::augment {

Point bezier_point(const BezierControl& ctrl, double k) {
    if (k < 0.0 || k > 1.0) throw ConfigError("bezier_point: k must lie in [0,1]");
    const double u = 1.0 - k;
    const double b0 = u * u * u;
    const double b1 = 3.0 * u * u * k;
    const double b2 = 3.0 * u * k * k;
    const double b3 = k * k * k;
    // endpoints fixed at (0,0) and (1,1)
    return {b1 * ctrl.p1.x + b2 * ctrl.p2.x + b3, b1 * ctrl.p1.y + b2 * ctrl.p2.y + b3};
}

double IntensityLUT::lookup(double v) const {
    const int n = resolution();
    const double f = std::clamp(v, 0.0, 1.0) * (n - 1);
    const int i = std::min(n - 2, static_cast<int>(f));
    const double w = f - i;
    return (1.0 - w) * table[static_cast<size_t>(i)] + w * table[static_cast<size_t>(i + 1)];
}

IntensityLUT build_lut_from_curve_samples(const std::vector<double>& xs,
                                          const std::vector<double>& ys, int resolution) {
    double max_decrease = 0.0;
    for (size_t i = 1; i < xs.size(); ++i)
        max_decrease = std::max(max_decrease, xs[i - 1] - xs[i]);
    if (max_decrease > 1e-9)
        throw ConfigError("control points yield non-functional mapping");

    IntensityLUT lut;
    lut.table.resize(static_cast<size_t>(resolution));
    size_t seg = 0;
    for (int i = 0; i < resolution; ++i) {
        const double v = static_cast<double>(i) / (resolution - 1);
        while (seg + 2 < xs.size() && xs[seg + 1] < v) ++seg;
        const double x0 = xs[seg], x1 = xs[seg + 1];
        const double y0 = ys[seg], y1 = ys[seg + 1];
        double y;
        if (x1 - x0 <= 1e-15) {
            y = 0.5 * (y0 + y1);
        } else {
            const double w = std::clamp((v - x0) / (x1 - x0), 0.0, 1.0);
            y = (1.0 - w) * y0 + w * y1;
        }
        lut.table[static_cast<size_t>(i)] = std::clamp(y, 0.0, 1.0);
    }
    // exact endpoint preservation
    lut.table.front() = 0.0;
    lut.table.back() = 1.0;
    return lut;
}

IntensityLUT build_intensity_lut(const BezierControl& ctrl, int resolution) {
    ctrl.validate();
    if (resolution < 256) throw ConfigError("build_intensity_lut: resolution must be >= 256");
    const int samples = 4 * resolution;
    std::vector<double> xs(static_cast<size_t>(samples + 1));
    std::vector<double> ys(static_cast<size_t>(samples + 1));
    for (int i = 0; i <= samples; ++i) {
        const Point p = bezier_point(ctrl, static_cast<double>(i) / samples);
        xs[static_cast<size_t>(i)] = p.x;
        ys[static_cast<size_t>(i)] = p.y;
    }
    return build_lut_from_curve_samples(xs, ys, resolution);
}

}  // namespace mln::augment
