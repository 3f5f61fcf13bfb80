#include "mln/norm/layer_norm.hpp"

#include <cmath>

namespace mln::norm {

std::vector<double> layer_norm(const std::vector<double>& h, const LNParams& params) {
    const size_t n = h.size();
    if (n == 0) throw ShapeError("layer_norm: empty input");
    if (params.gamma.size() != n || params.omega.size() != n)
        throw ShapeError("layer_norm: parameter length mismatch");
    double u = 0.0;
    for (double v : h) {
        if (!std::isfinite(v)) throw NumericError("layer_norm: non-finite input");
        u += v;
    }
    u /= static_cast<double>(n);
    double var = 0.0;
    for (double v : h) var += (v - u) * (v - u);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + params.delta);
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = params.gamma[i] * (h[i] - u) * inv + params.omega[i];
    return out;
}

std::vector<double> mln_forward(const std::vector<double>& batch, int rows, int features,
                                int domain, MLNBank& bank, bool recording) {
    if (domain < 0 || domain >= bank.domains())
        throw ConfigError("mln_forward: domain " + std::to_string(domain) + " out of range (K=" +
                          std::to_string(bank.domains()) + ")");
    if (batch.size() != static_cast<size_t>(rows) * features)
        throw ShapeError("mln_forward: batch size does not match rows*features");
    const LNParams& p = bank.params[static_cast<size_t>(domain)];
    if (p.gamma.size() != static_cast<size_t>(features))
        throw ShapeError("mln_forward: bank feature width mismatch");

    std::vector<double> out(batch.size());
    double acc_u = 0.0, acc_sigma = 0.0;
    for (int r = 0; r < rows; ++r) {
        const double* h = batch.data() + static_cast<size_t>(r) * features;
        double u = 0.0;
        for (int c = 0; c < features; ++c) {
            if (!std::isfinite(h[c])) throw NumericError("mln_forward: non-finite input");
            u += h[c];
        }
        u /= features;
        double var = 0.0;
        for (int c = 0; c < features; ++c) var += (h[c] - u) * (h[c] - u);
        var /= features;
        const double inv = 1.0 / std::sqrt(var + p.delta);
        double* o = out.data() + static_cast<size_t>(r) * features;
        for (int c = 0; c < features; ++c) o[c] = p.gamma[static_cast<size_t>(c)] * (h[c] - u) * inv + p.omega[static_cast<size_t>(c)];
        acc_u += u;
        acc_sigma += std::sqrt(var);
    }
    if (recording)
        bank.recorder[static_cast<size_t>(domain)].add_batch(acc_u / rows, acc_sigma / rows);
    return out;
}

DomainSignature extract_signature(const std::vector<MLNBank*>& banks, int domain) {
    DomainSignature sig;
    sig.domain = domain;
    sig.entries.reserve(banks.size());
    for (const MLNBank* bank : banks) {
        if (domain < 0 || domain >= bank->domains())
            throw ConfigError("extract_signature: domain out of range");
        const StatRecorder& rec = bank->recorder[static_cast<size_t>(domain)];
        if (rec.empty())
            throw NumericError("extract_signature: no recorded statistics for domain " +
                               std::to_string(domain) + " at site " + bank->site_id);
        SignatureEntry e;
        e.site_id = bank->site_id;
        e.u = rec.mean_u();
        e.sigma = rec.mean_sigma();
        sig.entries.push_back(std::move(e));
    }
    return sig;
}

}  // namespace mln::norm
