#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mln/core/rng.hpp"
#include "mln/norm/layer_norm.hpp"

using namespace mln;
using norm::LNParams;
using norm::MLNBank;

TEST_CASE("layer_norm hand values") {
    LNParams p = LNParams::identity(3, 0.0);
    const auto out = norm::layer_norm({1.0, 2.0, 3.0}, p);
    // sigma = sqrt(2/3)
    CHECK(out[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(out[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(out[2] == doctest::Approx(1.2247).epsilon(1e-4));

    LNParams affine = p;
    affine.gamma = {2.0, 2.0, 2.0};
    affine.omega = {1.0, 1.0, 1.0};
    const auto out2 = norm::layer_norm({1.0, 2.0, 3.0}, affine);
    CHECK(out2[0] == doctest::Approx(-1.4495).epsilon(1e-4));
    CHECK(out2[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(out2[2] == doctest::Approx(3.4495).epsilon(1e-4));
}

TEST_CASE("constant input maps to omega") {
    LNParams p = LNParams::identity(4);
    p.omega = {0.5, -0.5, 2.0, 0.0};
    const auto out = norm::layer_norm({3.0, 3.0, 3.0, 3.0}, p);
    for (size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(p.omega[i]).epsilon(1e-6));
}

TEST_CASE("non-finite input raises a numeric error") {
    LNParams p = LNParams::identity(2);
    CHECK_THROWS_AS(norm::layer_norm({1.0, std::nan("")}, p), mln::NumericError);
}

TEST_CASE("normalization property on random vectors") {
    core::Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 8 + rng.uniform_int(64);
        std::vector<double> h(n);
        for (auto& v : h) v = rng.normal(0.0, 2.0 + rng.uniform());
        LNParams p = LNParams::identity(static_cast<int>(n), 0.0);
        const auto out = norm::layer_norm(h, p);
        double mean = 0.0;
        for (double v : out) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : out) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-4);
    }
}

TEST_CASE("mln_forward selects one branch and isolates the others") {
    MLNBank bank("site0", 3, 2, 0.0);
    const std::vector<double> batch = {1.0, 2.0, 3.0, 0.0, 5.0, 1.0};
    const auto out0 = norm::mln_forward(batch, 2, 3, 0, bank, false);
    const auto out1 = norm::mln_forward(batch, 2, 3, 1, bank, false);
    CHECK(out0 == out1);  // identical parameter sets

    // perturb branch 1 only: branch 0 output is bit-identical
    bank.params[1].gamma = {5.0, 5.0, 5.0};
    bank.params[1].omega = {1.0, 1.0, 1.0};
    const auto out0_after = norm::mln_forward(batch, 2, 3, 0, bank, false);
    CHECK(out0 == out0_after);
    const auto out1_after = norm::mln_forward(batch, 2, 3, 1, bank, false);
    CHECK(out1_after != out1);

    CHECK_THROWS_AS(norm::mln_forward(batch, 2, 3, 2, bank, false), mln::ConfigError);
}

TEST_CASE("recorder accumulates batch statistics") {
    MLNBank bank("site0", 2, 1, 0.0);
    // batch of identical rows: recorded stats equal that row's (u, sigma)
    norm::mln_forward({1.0, 3.0, 1.0, 3.0}, 2, 2, 0, bank, true);
    CHECK(bank.recorder[0].mean_u() == doctest::Approx(2.0));
    CHECK(bank.recorder[0].mean_sigma() == doctest::Approx(1.0));

    bank.recorder[0].reset();
    bank.recorder[0].add_batch(0.0, 1.0);
    bank.recorder[0].add_batch(2.0, 3.0);
    CHECK(bank.recorder[0].mean_u() == doctest::Approx(1.0));
    CHECK(bank.recorder[0].mean_sigma() == doctest::Approx(2.0));
}

TEST_CASE("recorder linearity: merged state is the count-weighted mean") {
    core::Rng rng(3);
    norm::StatRecorder joint, first, second;
    const int n1 = 5, n2 = 7;
    double sum_u = 0.0;
    for (int i = 0; i < n1 + n2; ++i) {
        const double u = rng.normal(0.0, 1.0), s = rng.uniform(0.5, 2.0);
        joint.add_batch(u, s);
        (i < n1 ? first : second).add_batch(u, s);
        sum_u += u;
    }
    const double merged_u =
        (first.mean_u() * n1 + second.mean_u() * n2) / static_cast<double>(n1 + n2);
    CHECK(joint.mean_u() == doctest::Approx(merged_u).epsilon(1e-12));
    CHECK(joint.mean_u() == doctest::Approx(sum_u / (n1 + n2)).epsilon(1e-12));
}

TEST_CASE("signature extraction and its error paths") {
    MLNBank a("embed.norm", 4, 2), b("enc0.b0.norm1", 4, 2);
    a.recorder[0].add_batch(0.0, 1.0);
    b.recorder[0].add_batch(2.0, 3.0);
    const auto sig = norm::extract_signature({&a, &b}, 0);
    REQUIRE(sig.entries.size() == 2);
    CHECK(sig.entries[0].site_id == "embed.norm");
    CHECK(sig.entries[0].u == doctest::Approx(0.0));
    CHECK(sig.entries[0].sigma == doctest::Approx(1.0));
    CHECK(sig.entries[1].u == doctest::Approx(2.0));
    CHECK(sig.entries[1].sigma == doctest::Approx(3.0));

    // untrained domain
    CHECK_THROWS_AS(norm::extract_signature({&a, &b}, 1), mln::NumericError);
}

TEST_CASE("bank parameter count scales linearly in K") {
    const int features = 24;
    for (int k : {1, 2, 4}) {
        MLNBank bank("s", features, k);
        int64_t params = 0;
        for (const auto& p : bank.params)
            params += static_cast<int64_t>(p.gamma.size() + p.omega.size());
        CHECK(params == static_cast<int64_t>(k) * 2 * features);
    }
}
