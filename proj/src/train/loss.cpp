#include "mln/train/loss.hpp"

#include <cmath>

namespace mln::train {

ClassTarget ClassTarget::from_mask(const core::Mask& mask, int64_t classes) {
    ClassTarget z;
    z.pixels = static_cast<int64_t>(mask.pixels.size());
    z.classes = classes;
    z.values.assign(static_cast<size_t>(z.pixels * classes), 0.0);
    for (int64_t i = 0; i < z.pixels; ++i) {
        const int64_t cls = mask.pixels[static_cast<size_t>(i)] ? 1 : 0;
        z.values[static_cast<size_t>(i * classes + cls)] = 1.0;
    }
    return z;
}

double dice_loss(const ProbabilityMap& c, const ClassTarget& z, double smooth) {
    if (c.pixels != z.pixels || c.classes != z.classes)
        throw ShapeError("dice_loss: prediction and target shapes differ");
    if (c.classes < 1 || c.pixels < 1) throw ShapeError("dice_loss: empty input");
    double loss = 0.0;
    for (int64_t n = 0; n < c.classes; ++n) {
        double num = smooth, den = smooth;
        for (int64_t i = 0; i < c.pixels; ++i) {
            num += c.at(i, n) * z.at(i, n);
            den += c.at(i, n) + z.at(i, n);
        }
        if (den > 0.0) loss += num / den;
    }
    return -2.0 / static_cast<double>(c.classes) * loss;
}

double total_loss(const std::vector<double>& per_branch_losses) {
    if (per_branch_losses.empty()) throw ConfigError("total_loss: no branch losses given");
    double sum = 0.0;
    for (double v : per_branch_losses) {
        if (!std::isfinite(v)) throw NumericError("total_loss: non-finite branch loss");
        sum += v;
    }
    return sum;
}

}  // namespace mln::train
