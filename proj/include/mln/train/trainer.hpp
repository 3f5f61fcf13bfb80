#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mln/augment/augment.hpp"
#include "mln/core/image.hpp"
#include "mln/net/swin_unet.hpp"
#include "mln/train/checkpoint.hpp"

namespace mln::train {

struct TrainConfig {
    int batch_size = 4;
    int max_epochs = 30;          // 100 at full scale
    double learning_rate = 1e-4;
    double momentum = 0.9;        // first-moment decay of the optimizer
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-3;
    double dice_smooth = 1e-5;
    uint64_t seed = 1;
    std::string signature_window = "last_epoch";  // or "last_batch"
    bool round_robin = false;             // one domain branch per step
    bool conventional_augment = false;    // geometric augmentation (baseline mode)
    bool signature_correctional_mean = false;
    int workers = 1;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

struct EpochLog {
    int epoch = 0;
    std::vector<double> branch_losses;  // mean per-branch loss over the epoch
    double total = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
};

// Multi-branch Dice training over augmented domains. Every step expands each
// batch sample into its K domain variants, runs one forward per domain
// through that domain's normalization branch, and sums the per-branch Dice
// losses for a single optimizer step. Statistics are recorded during the
// signature window and stored in the checkpoint, one signature per domain.
//
// `resume` (optional) supplies initial weights and the starting epoch count.
TrainResult train(const TrainConfig& train_cfg, const net::NetConfig& net_cfg,
                  const augment::DomainSpec& spec,
                  const std::vector<std::pair<core::Image, core::Mask>>& dataset,
                  const Checkpoint* resume = nullptr);

// Mean over pixels strictly greater than the image minimum; nullopt for a
// constant image (degenerate, callers fall back to plain signatures).
std::optional<double> correctional_mean(const core::Image& image);

}  // namespace mln::train
