#include "mln/select/branch_select.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "mln/net/infer.hpp"
#include "mln/train/trainer.hpp"

namespace mln::select {

using nlohmann::json;

std::string SignatureDistanceReport::to_json() const {
    json j;
    j["metric"] = metric;
    j["selected"] = selected;
    json branches = json::array();
    for (const auto& b : per_branch) {
        json jb;
        jb["branch"] = b.branch;
        jb["layer_scores"] = b.layer_scores;
        jb["distance"] = b.distance;
        jb["degenerate"] = b.degenerate;
        branches.push_back(jb);
    }
    j["per_branch"] = branches;
    return j.dump();
}

double cosine_similarity(const std::vector<double>& q_d, const std::vector<double>& q_t) {
    if (q_d.size() != q_t.size())
        throw ShapeError("cosine_similarity: vector lengths differ");
    if (q_d.empty()) throw ShapeError("cosine_similarity: empty vectors");
    double dot = 0.0, nd = 0.0, nt = 0.0;
    for (size_t i = 0; i < q_d.size(); ++i) {
        dot += q_d[i] * q_t[i];
        nd += q_d[i] * q_d[i];
        nt += q_t[i] * q_t[i];
    }
    if (nd == 0.0 || nt == 0.0)
        throw NumericError("cosine_similarity: degenerate (zero-norm) signature vector");
    return dot / (std::sqrt(nd) * std::sqrt(nt));
}

double signature_distance(const norm::DomainSignature& q_d, const norm::DomainSignature& q_t,
                          Metric metric) {
    if (q_d.entries.size() != q_t.entries.size())
        throw ShapeError("signature_distance: layer counts differ");
    double distance = 0.0;
    for (size_t l = 0; l < q_d.entries.size(); ++l) {
        const auto vd = q_d.layer_vector(l);
        const auto vt = q_t.layer_vector(l);
        if (vd.size() != vt.size())
            throw ShapeError("signature_distance: entry widths differ at layer " + std::to_string(l));
        if (metric == Metric::Cosine) {
            distance += 1.0 - cosine_similarity(vd, vt);
        } else {
            double sq = 0.0;
            for (size_t i = 0; i < vd.size(); ++i) sq += (vd[i] - vt[i]) * (vd[i] - vt[i]);
            distance += std::sqrt(sq);
        }
    }
    return distance;
}

norm::DomainSignature compute_target_signature(const net::SwinUnet<float>& model,
                                               const core::Image& image, int branch,
                                               std::optional<double> corr_mean) {
    std::vector<core::ops::RowStats> stats;
    net::segment_forward<float>(model, image, branch, &stats);
    norm::DomainSignature sig;
    sig.domain = branch;
    const auto& sites = model.sites();
    sig.entries.reserve(sites.size());
    for (size_t i = 0; i < sites.size(); ++i) {
        norm::SignatureEntry e;
        e.site_id = sites[i].name;
        e.u = stats[i].mean_of_means;
        e.sigma = stats[i].mean_of_stds;
        if (corr_mean) {
            e.has_m = true;
            e.m = *corr_mean;
        }
        sig.entries.push_back(std::move(e));
    }
    return sig;
}

SelectionResult select_branch(const net::SwinUnet<float>& model, const train::Checkpoint& ckpt,
                              const core::Image& image, const SelectOptions& options) {
    const int K = model.config().num_domains;
    if (static_cast<int>(ckpt.signatures.size()) != K)
        throw IntegrityError("select_branch: checkpoint must hold exactly K signatures");

    // The extended variant is in force only when the stored signatures carry
    // the correctional mean and the image is not degenerate (constant).
    const bool stored_m = !ckpt.signatures.empty() && !ckpt.signatures[0].entries.empty() &&
                          ckpt.signatures[0].entries[0].has_m;
    std::optional<double> cm;
    if (stored_m) cm = train::correctional_mean(image);
    const bool use_m = stored_m && cm.has_value();

    auto stored_signature = [&](int b) {
        norm::DomainSignature sig = ckpt.signatures[static_cast<size_t>(b)];
        if (!use_m)
            for (auto& e : sig.entries) e.has_m = false;
        return sig;
    };

    SignatureDistanceReport report;
    report.metric = options.metric == Metric::Cosine ? "cosine" : "euclidean";
    std::vector<core::Tensor<float>> probs(static_cast<size_t>(K));

    for (int b = 0; b < K; ++b) {
        BranchScore score;
        score.branch = b;
        std::vector<core::ops::RowStats> stats;
        probs[static_cast<size_t>(b)] = net::segment_forward<float>(model, image, b, &stats);
        norm::DomainSignature qt;
        qt.domain = b;
        const auto& sites = model.sites();
        for (size_t i = 0; i < sites.size(); ++i) {
            norm::SignatureEntry e;
            e.site_id = sites[i].name;
            e.u = stats[i].mean_of_means;
            e.sigma = stats[i].mean_of_stds;
            if (use_m) {
                e.has_m = true;
                e.m = *cm;
            }
            qt.entries.push_back(std::move(e));
        }
        const norm::DomainSignature qd = stored_signature(b);
        try {
            score.distance = 0.0;
            for (size_t l = 0; l < qd.entries.size(); ++l) {
                const auto vd = qd.layer_vector(l);
                const auto vt = qt.layer_vector(l);
                if (vd.size() != vt.size())
                    throw ShapeError("select_branch: signature width mismatch");
                if (options.metric == Metric::Cosine) {
                    const double c = cosine_similarity(vd, vt);
                    score.layer_scores.push_back(c);
                    score.distance += 1.0 - c;
                } else {
                    double sq = 0.0;
                    for (size_t i = 0; i < vd.size(); ++i) sq += (vd[i] - vt[i]) * (vd[i] - vt[i]);
                    const double n = std::sqrt(sq);
                    score.layer_scores.push_back(n);
                    score.distance += n;
                }
            }
        } catch (const NumericError&) {
            score.degenerate = true;
            score.distance = std::numeric_limits<double>::quiet_NaN();
        }
        report.per_branch.push_back(std::move(score));
    }

    int best = -1;
    for (int b = 0; b < K; ++b) {
        const BranchScore& s = report.per_branch[static_cast<size_t>(b)];
        if (s.degenerate) continue;
        if (best < 0) {
            best = b;
            continue;
        }
        const double cur = report.per_branch[static_cast<size_t>(best)].distance;
        const bool literal_cosine = options.metric == Metric::Cosine &&
                                    options.sense == SelectionSense::LiteralMinSimilarity;
        // literal reading minimizes summed similarity, i.e. maximizes distance
        if (literal_cosine ? s.distance > cur : s.distance < cur) best = b;
    }
    if (best < 0)
        throw NumericError("select_branch: all branch signatures degenerate; report: " +
                           report.to_json());
    report.selected = best;

    SelectionResult result;
    result.report = std::move(report);
    result.probs = std::move(probs[static_cast<size_t>(best)]);
    result.mask = net::argmax_mask(result.probs, image.height, image.width, image.spacing);
    return result;
}

core::Mask sum_branches_mask(const net::SwinUnet<float>& model, const core::Image& image) {
    const int K = model.config().num_domains;
    core::Mask out(image.height, image.width, 0, image.spacing);
    for (int b = 0; b < K; ++b) {
        const auto probs = net::segment_forward<float>(model, image, b);
        const core::Mask m = net::argmax_mask(probs, image.height, image.width, image.spacing);
        for (size_t i = 0; i < out.pixels.size(); ++i)
            out.pixels[i] = static_cast<uint8_t>(out.pixels[i] | m.pixels[i]);
    }
    return out;
}

}  // namespace mln::select
