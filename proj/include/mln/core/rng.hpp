#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mln::core {

// Deterministic RNG wrapper. Distributions are implemented by hand so that
// streams are reproducible independent of the standard library in use.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        // rejection sampling keeps the draw unbiased
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool coin() { return (engine_() & 1u) != 0; }

    // Box-Muller; consumes two uniforms per pair, caches the second draw.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // Truncated normal in [-2, 2] sigmas, the usual weight-init flavor.
    double trunc_normal(double sigma) {
        double x = normal();
        while (x < -2.0 || x > 2.0) x = normal();
        return x * sigma;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stable stream derivation: hash-combines a root seed with a stream tag so
// sub-generators are independent of draw order elsewhere.
inline uint64_t derive_seed(uint64_t root, uint64_t stream) {
    uint64_t z = root + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace mln::core
