#pragma once

#include "mln/core/image.hpp"
#include "mln/core/tape.hpp"
#include "mln/net/swin_unet.hpp"

namespace mln::net {

// One eval-mode pass: per-pixel class probabilities [H*W, num_classes].
template <typename S>
core::Tensor<S> segment_forward(const SwinUnet<S>& model, const core::Image& image, int domain,
                                std::vector<core::ops::RowStats>* site_stats = nullptr) {
    const auto& cfg = model.config();
    if (image.height != cfg.input_h || image.width != cfg.input_w)
        throw ShapeError("segment_forward: image size does not match configured input size");
    core::Tensor<S> input({static_cast<int64_t>(image.height) * image.width});
    for (size_t i = 0; i < image.pixels.size(); ++i)
        input.data[i] = static_cast<S>(image.pixels[i]);
    core::Tape<S> tape;
    auto fwd = model.forward(tape, input, domain, site_stats != nullptr, nullptr);
    if (site_stats) *site_stats = std::move(fwd.site_stats);
    return tape.value(fwd.probs);
}

// Argmax decode of a probability grid into a binary lesion mask
// (class 1 = foreground).
template <typename S>
core::Mask argmax_mask(const core::Tensor<S>& probs, int height, int width, double spacing = 1.0) {
    const int64_t classes = probs.last_dim();
    core::Mask mask(height, width, 0, spacing);
    for (int64_t i = 0; i < probs.rows(); ++i) {
        const S* row = probs.ptr() + i * classes;
        int best = 0;
        for (int64_t c = 1; c < classes; ++c)
            if (row[c] > row[best]) best = static_cast<int>(c);
        mask.pixels[static_cast<size_t>(i)] = best == 1 ? 1 : 0;
    }
    return mask;
}

}  // namespace mln::net
