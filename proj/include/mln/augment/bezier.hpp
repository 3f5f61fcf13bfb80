#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mln/core/errors.hpp"

namespace mln::augment {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Cubic curve with fixed endpoints (0,0) and (1,1); the two interior control
// points shape the intensity remapping. All coordinates must lie in [0,1].
struct BezierControl {
    Point p1;
    Point p2;

    void validate() const {
        for (const Point& p : {p1, p2}) {
            if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0)
                throw ConfigError("BezierControl: control coordinates must lie in [0,1]");
        }
    }
};

// Cubic Bernstein evaluation of the curve at parameter k in [0,1].
Point bezier_point(const BezierControl& ctrl, double k);

// Tabulated monotone intensity map on a uniform grid over [0,1].
struct IntensityLUT {
    std::vector<double> table;  // table.front() == 0, table.back() == 1

    int resolution() const { return static_cast<int>(table.size()); }
    // Piecewise-linear lookup for v in [0,1] (clamped).
    double lookup(double v) const;
};

// Samples the curve densely in k, verifies x(k) is nondecreasing (max
// decrease above 1e-9 fails construction), then inverts x by linear
// interpolation onto a uniform intensity grid.
IntensityLUT build_intensity_lut(const BezierControl& ctrl, int resolution = 4096);

// Inversion core, exposed for the non-functional-mapping error path.
IntensityLUT build_lut_from_curve_samples(const std::vector<double>& xs,
                                          const std::vector<double>& ys, int resolution);

}  // namespace mln::augment
