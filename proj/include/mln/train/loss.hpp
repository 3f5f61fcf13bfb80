#pragma once

#include <vector>

#include "mln/core/image.hpp"
#include "mln/core/tape.hpp"

namespace mln::train {

// Per-pixel softmax outputs, [pixels x classes], rows summing to 1.
struct ProbabilityMap {
    int64_t pixels = 0;
    int64_t classes = 0;
    std::vector<double> values;  // row-major

    double at(int64_t i, int64_t n) const { return values[static_cast<size_t>(i * classes + n)]; }
};

// One-hot ground truth of the same shape.
struct ClassTarget {
    int64_t pixels = 0;
    int64_t classes = 0;
    std::vector<double> values;

    static ClassTarget from_mask(const core::Mask& mask, int64_t classes = 2);
    double at(int64_t i, int64_t n) const { return values[static_cast<size_t>(i * classes + n)]; }
};

// f = -(2/N) * sum_n (sum_i c*z + s) / (sum_i c + sum_i z + s).
// In [-1, 0] for valid inputs when s = 0.
double dice_loss(const ProbabilityMap& c, const ClassTarget& z, double smooth = 1e-5);

// Arithmetic sum of per-branch losses.
double total_loss(const std::vector<double>& per_branch_losses);

namespace ops {

// Differentiable Dice loss over tape probabilities [pixels x classes].
// `onehot` is caller-owned and must outlive the tape.
template <typename S>
typename core::Tape<S>::Var dice_from_probs(core::Tape<S>& t, typename core::Tape<S>::Var probs,
                                            const core::Tensor<S>* onehot, S smooth) {
    using Var = typename core::Tape<S>::Var;
    const auto& p = t.value(probs);
    if (p.shape != onehot->shape) throw ShapeError("dice_from_probs: shape mismatch");
    const int64_t C = p.last_dim();
    const int64_t R = p.rows();
    auto inter = std::make_shared<std::vector<S>>(static_cast<size_t>(C), S(0));
    auto denom = std::make_shared<std::vector<S>>(static_cast<size_t>(C), S(0));
    for (int64_t n = 0; n < C; ++n) {
        S num = smooth, den = smooth;
        for (int64_t i = 0; i < R; ++i) {
            const S c = p.data[static_cast<size_t>(i * C + n)];
            const S z = onehot->data[static_cast<size_t>(i * C + n)];
            num += c * z;
            den += c + z;
        }
        (*inter)[static_cast<size_t>(n)] = num;
        (*denom)[static_cast<size_t>(n)] = den;
    }
    S loss = S(0);
    for (int64_t n = 0; n < C; ++n)
        loss += (*inter)[static_cast<size_t>(n)] / (*denom)[static_cast<size_t>(n)];
    loss *= S(-2) / static_cast<S>(C);
    core::Tensor<S> out({1});
    out.data[0] = loss;
    const bool rg = t.requires_grad(probs);
    return t.emit(std::move(out), rg,
                  !rg ? typename core::Tape<S>::BackwardFn(nullptr)
                      : [probs, onehot, inter, denom, R, C](core::Tape<S>& tp, Var self) {
                            const S g = tp.grad(self).data[0];
                            auto& gp = tp.grad(probs);
                            const S k = g * S(-2) / static_cast<S>(C);
                            for (int64_t n = 0; n < C; ++n) {
                                const S num = (*inter)[static_cast<size_t>(n)];
                                const S den = (*denom)[static_cast<size_t>(n)];
                                const S inv_den2 = S(1) / (den * den);
                                for (int64_t i = 0; i < R; ++i) {
                                    const S z = onehot->data[static_cast<size_t>(i * C + n)];
                                    gp.data[static_cast<size_t>(i * C + n)] +=
                                        k * (z * den - num) * inv_den2;
                                }
                            }
                        });
}

}  // namespace ops
}  // namespace mln::train
