#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mln/core/image.hpp"
#include "mln/core/tensor.hpp"
#include "mln/net/swin_unet.hpp"
#include "mln/norm/layer_norm.hpp"
#include "mln/train/checkpoint.hpp"

namespace mln::select {

enum class Metric { Cosine, Euclidean };

// The similarity-sum formula admits two readings; BestMatch picks the most
// similar branch (the default), LiteralMinSimilarity minimizes the summed
// similarity instead.
enum class SelectionSense { BestMatch, LiteralMinSimilarity };

struct BranchScore {
    int branch = 0;
    std::vector<double> layer_scores;  // per-layer cosine similarity / euclidean norm
    double distance = 0.0;             // aggregate used for selection
    bool degenerate = false;
};

struct SignatureDistanceReport {
    std::string metric;
    std::vector<BranchScore> per_branch;
    int selected = -1;

    std::string to_json() const;
};

// (q_d . q_t) / (|q_d| |q_t|); throws NumericError on a zero-norm vector.
double cosine_similarity(const std::vector<double>& q_d, const std::vector<double>& q_t);

// Cosine mode: sum_i (1 - C(q_d^i, q_t^i)); Euclidean mode: sum_i |q_d^i - q_t^i|_2.
double signature_distance(const norm::DomainSignature& q_d, const norm::DomainSignature& q_t,
                          Metric metric);

// One statistics-capturing pass through branch `b`. The target signature
// depends on the branch because upstream normalization feeds later sites.
// `corr_mean`, when set, is appended to every per-layer vector.
norm::DomainSignature compute_target_signature(const net::SwinUnet<float>& model,
                                               const core::Image& image, int branch,
                                               std::optional<double> corr_mean = std::nullopt);

struct SelectOptions {
    Metric metric = Metric::Cosine;
    SelectionSense sense = SelectionSense::BestMatch;
};

struct SelectionResult {
    core::Mask mask;                     // argmax decode of the selected branch
    core::Tensor<float> probs;           // selected branch probabilities [H*W, classes]
    SignatureDistanceReport report;
};

// Scores every branch's stored signature against the per-branch target
// signature and returns the selected branch's segmentation plus the full
// report. Degenerate branches are excluded; if all are degenerate the
// selection fails with the report attached.
SelectionResult select_branch(const net::SwinUnet<float>& model, const train::Checkpoint& ckpt,
                              const core::Image& image, const SelectOptions& options = {});

// Union-of-branches ablation: pixels predicted foreground by at least one
// branch count as lesion.
core::Mask sum_branches_mask(const net::SwinUnet<float>& model, const core::Image& image);

}  // namespace mln::select
