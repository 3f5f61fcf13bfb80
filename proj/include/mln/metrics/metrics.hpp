#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mln/core/image.hpp"

namespace mln::metrics {

using core::Mask;

struct ConfusionCounts {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    int64_t tn = 0;
};

ConfusionCounts confusion(const Mask& pred, const Mask& gt);

// Zero denominators yield nullopt; callers exclude those from averages.
std::optional<double> tpr(const ConfusionCounts& c);
std::optional<double> precision(const ConfusionCounts& c);
std::optional<double> dsc(const ConfusionCounts& c);

// Boundary pixels: foreground with at least one background 4-neighbor
// (outside the grid counts as background). Coordinates are in pixels;
// spacing converts to mm.
struct SurfaceSet {
    std::vector<std::pair<int, int>> points;  // (y, x), row-major order
    double spacing = 1.0;

    bool empty() const { return points.empty(); }
};

SurfaceSet extract_surface(const Mask& mask);

// Symmetric average surface distance in mm:
//   [sum_p min_g |p-g| + sum_g min_p |g-p|] / (|P| + |G|).
// Both empty -> 0; exactly one empty -> nullopt. `directed` restricts the
// sum to P -> G (divided by |P|).
std::optional<double> asd(const SurfaceSet& P, const SurfaceSet& G, bool directed = false);

// Hausdorff distance in mm: max of the two directed sup-inf distances.
std::optional<double> hd(const SurfaceSet& P, const SurfaceSet& G);

// Exact squared Euclidean distance transform over an h x w grid: for every
// cell, the squared pixel distance to the nearest seed. Used by asd/hd;
// exposed for tests.
std::vector<int64_t> squared_edt(const std::vector<std::pair<int, int>>& seeds, int h, int w);

struct CaseMetrics {
    std::optional<double> tpr;
    std::optional<double> precision;
    std::optional<double> dsc;
    std::optional<double> hd_mm;
    std::optional<double> asd_mm;
};

CaseMetrics evaluate_case(const Mask& pred, const Mask& gt, double spacing_mm);

}  // namespace mln::metrics
