#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mln/core/errors.hpp"

namespace mln::norm {

// Scale/shift parameters of one normalization layer.
struct LNParams {
    std::vector<double> gamma;
    std::vector<double> omega;
    double delta = 1e-5;

    static LNParams identity(int features, double delta = 1e-5) {
        LNParams p;
        p.gamma.assign(static_cast<size_t>(features), 1.0);
        p.omega.assign(static_cast<size_t>(features), 0.0);
        p.delta = delta;
        return p;
    }
};

// output = gamma (.) (h - u) / sqrt(var + delta) + omega, with u and var the
// mean and population variance over the vector.
std::vector<double> layer_norm(const std::vector<double>& h, const LNParams& params);

// Running per-domain mean of batchwise (u, sigma) statistics.
struct StatRecorder {
    double sum_u = 0.0;
    double sum_sigma = 0.0;
    int64_t batches = 0;

    void add_batch(double u_mean, double sigma_mean) {
        sum_u += u_mean;
        sum_sigma += sigma_mean;
        ++batches;
    }
    void reset() { *this = StatRecorder{}; }
    bool empty() const { return batches == 0; }
    double mean_u() const { return sum_u / static_cast<double>(batches); }
    double mean_sigma() const { return sum_sigma / static_cast<double>(batches); }
};

// One normalization site with one parameter set per domain plus per-domain
// input-statistic recorders.
struct MLNBank {
    std::string site_id;
    std::vector<LNParams> params;      // size K
    std::vector<StatRecorder> recorder;  // size K

    MLNBank() = default;
    MLNBank(std::string site, int features, int num_domains, double delta = 1e-5)
        : site_id(std::move(site)) {
        params.assign(static_cast<size_t>(num_domains), LNParams::identity(features, delta));
        recorder.assign(static_cast<size_t>(num_domains), StatRecorder{});
    }
    int domains() const { return static_cast<int>(params.size()); }
};

// Normalizes a batch of row vectors [rows x features] through the chosen
// domain's parameters. When recording, the batch's mean (u, sigma) over rows
// is accumulated into that domain's recorder.
std::vector<double> mln_forward(const std::vector<double>& batch, int rows, int features,
                                int domain, MLNBank& bank, bool recording);

// Per-layer (u, sigma[, m]) statistics characterizing one domain.
struct SignatureEntry {
    std::string site_id;
    double u = 0.0;
    double sigma = 0.0;
    bool has_m = false;
    double m = 0.0;  // correctional mean, present in the extended variant
};

struct DomainSignature {
    int domain = 0;
    std::vector<SignatureEntry> entries;

    // Flattened per-layer vector for similarity computations.
    std::vector<double> layer_vector(size_t layer) const {
        const SignatureEntry& e = entries[layer];
        if (e.has_m) return {e.u, e.sigma, e.m};
        return {e.u, e.sigma};
    }
};

// Averages each site's recorded statistics into one signature entry per site.
// Throws if any recorder is empty for the domain.
DomainSignature extract_signature(const std::vector<MLNBank*>& banks, int domain);

}  // namespace mln::norm
