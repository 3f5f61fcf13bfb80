#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mln/core/rng.hpp"
#include "mln/metrics/metrics.hpp"

using namespace mln;
using core::Mask;
using metrics::SurfaceSet;

namespace {

// All-pairs reference: for each point of `from`, the min squared distance to
// `to`, in row-major point order. Independent of the distance-transform path.
struct BruteForce {
    double sum_sqrt = 0.0;
    int64_t max_sq = 0;
    int64_t count = 0;
};

BruteForce brute_directed(const SurfaceSet& from, const SurfaceSet& to) {
    BruteForce r;
    for (const auto& [py, px] : from.points) {
        int64_t best = INT64_MAX;
        for (const auto& [gy, gx] : to.points) {
            const int64_t dy = py - gy, dx = px - gx;
            best = std::min(best, dy * dy + dx * dx);
        }
        r.sum_sqrt += std::sqrt(static_cast<double>(best));
        r.max_sq = std::max(r.max_sq, best);
        ++r.count;
    }
    return r;
}

double brute_asd(const SurfaceSet& P, const SurfaceSet& G) {
    const auto pg = brute_directed(P, G);
    const auto gp = brute_directed(G, P);
    return P.spacing * ((pg.sum_sqrt + gp.sum_sqrt) / static_cast<double>(pg.count + gp.count));
}

double brute_hd(const SurfaceSet& P, const SurfaceSet& G) {
    const auto pg = brute_directed(P, G);
    const auto gp = brute_directed(G, P);
    return P.spacing * std::sqrt(static_cast<double>(std::max(pg.max_sq, gp.max_sq)));
}

Mask random_mask(core::Rng& rng, int h, int w, double density) {
    Mask m(h, w, 0);
    for (auto& v : m.pixels) v = rng.uniform() < density ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("confusion counts on constructed instances") {
    Mask full(2, 2, 1), empty(2, 2, 0);
    auto c = metrics::confusion(full, full);
    CHECK(c.tp == 4);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    c = metrics::confusion(empty, full);
    CHECK(c.fn == 4);

    // pred/gt overlapping on 2 of 3 gt-foreground pixels with 1 false positive
    Mask gt(2, 3, 0), pred(2, 3, 0);
    gt.at(0, 0) = gt.at(0, 1) = gt.at(0, 2) = 1;
    pred.at(0, 0) = pred.at(0, 1) = 1;
    pred.at(1, 0) = 1;
    c = metrics::confusion(pred, gt);
    CHECK(c.tp == 2);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tp + c.fp + c.fn + c.tn == 6);

    Mask odd(3, 3, 0);
    CHECK_THROWS_AS(metrics::confusion(odd, gt), mln::ShapeError);
}

TEST_CASE("tpr, precision, dsc formulas and undefined cases") {
    metrics::ConfusionCounts c{2, 1, 1, 10};
    CHECK(*metrics::tpr(c) == doctest::Approx(0.6667).epsilon(1e-4));
    CHECK(*metrics::precision(c) == doctest::Approx(0.6667).epsilon(1e-4));
    CHECK(*metrics::dsc(c) == doctest::Approx(0.6667).epsilon(1e-4));

    metrics::ConfusionCounts perfect{5, 0, 0, 5};
    CHECK(*metrics::tpr(perfect) == 1.0);
    CHECK(*metrics::precision(perfect) == 1.0);
    CHECK(*metrics::dsc(perfect) == 1.0);

    metrics::ConfusionCounts empty_pred{0, 0, 3, 7};
    CHECK(*metrics::tpr(empty_pred) == 0.0);
    CHECK(*metrics::dsc(empty_pred) == 0.0);
    CHECK_FALSE(metrics::precision(empty_pred).has_value());
}

TEST_CASE("dsc equals the harmonic combination of precision and tpr") {
    core::Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        metrics::ConfusionCounts c;
        c.tp = static_cast<int64_t>(rng.uniform_int(20));
        c.fp = static_cast<int64_t>(rng.uniform_int(20));
        c.fn = static_cast<int64_t>(rng.uniform_int(20));
        const auto p = metrics::precision(c), t = metrics::tpr(c), d = metrics::dsc(c);
        if (p && t && d && (*p + *t) > 0.0)
            CHECK(*d == doctest::Approx(2.0 * *p * *t / (*p + *t)).epsilon(1e-12));
    }
}

TEST_CASE("surface extraction") {
    Mask single(5, 5, 0);
    single.at(2, 2) = 1;
    auto s = metrics::extract_surface(single);
    REQUIRE(s.points.size() == 1);
    CHECK(s.points[0] == std::pair<int, int>{2, 2});

    Mask square(5, 5, 0);
    for (int y = 1; y <= 3; ++y)
        for (int x = 1; x <= 3; ++x) square.at(y, x) = 1;
    s = metrics::extract_surface(square);
    CHECK(s.points.size() == 8);  // center excluded

    Mask empty(4, 4, 0);
    CHECK(metrics::extract_surface(empty).points.empty());
}

TEST_CASE("asd and hd hand values") {
    SurfaceSet P, G;
    P.points = {{0, 0}};
    G.points = {{0, 2}};
    CHECK(*metrics::asd(P, G) == doctest::Approx(2.0));  // (2 + 2) / 2

    SurfaceSet P2, G2;
    P2.points = {{0, 0}};
    G2.points = {{3, 4}};
    CHECK(*metrics::hd(P2, G2) == doctest::Approx(5.0));

    CHECK(*metrics::asd(P, P) == 0.0);
    CHECK(*metrics::hd(P, P) == 0.0);

    SurfaceSet none;
    CHECK(*metrics::asd(none, none) == 0.0);
    CHECK(*metrics::hd(none, none) == 0.0);
    CHECK_FALSE(metrics::asd(P, none).has_value());
    CHECK_FALSE(metrics::hd(none, P).has_value());
}

TEST_CASE("directed asd divides by |P| only") {
    SurfaceSet P, G;
    P.points = {{0, 0}};
    G.points = {{0, 3}, {0, 4}};
    CHECK(*metrics::asd(P, G, /*directed=*/true) == doctest::Approx(3.0));
}

TEST_CASE("distance transform equals brute force exactly on random masks") {
    core::Rng rng(11);
    int nontrivial = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 4 + static_cast<int>(rng.uniform_int(29));
        const int w = 4 + static_cast<int>(rng.uniform_int(29));
        const Mask a = random_mask(rng, h, w, 0.08 + 0.3 * rng.uniform());
        const Mask b = random_mask(rng, h, w, 0.08 + 0.3 * rng.uniform());
        SurfaceSet P = metrics::extract_surface(a);
        SurfaceSet G = metrics::extract_surface(b);
        const auto fast_asd = metrics::asd(P, G);
        const auto fast_hd = metrics::hd(P, G);
        if (P.empty() || G.empty()) {
            CHECK(fast_asd.has_value() == (P.empty() && G.empty()));
            continue;
        }
        ++nontrivial;
        CHECK(*fast_asd == brute_asd(P, G));  // bit-exact
        CHECK(*fast_hd == brute_hd(P, G));
    }
    CHECK(nontrivial > 900);
}

TEST_CASE("symmetry of hd and asd") {
    core::Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Mask a = random_mask(rng, 20, 20, 0.2);
        const Mask b = random_mask(rng, 20, 20, 0.2);
        const auto P = metrics::extract_surface(a);
        const auto G = metrics::extract_surface(b);
        if (P.empty() || G.empty()) continue;
        CHECK(*metrics::hd(P, G) == *metrics::hd(G, P));
        CHECK(*metrics::asd(P, G) == *metrics::asd(G, P));
    }
}

TEST_CASE("spacing scales distances exactly and leaves overlap metrics unchanged") {
    core::Rng rng(17);
    const Mask a = random_mask(rng, 24, 24, 0.2);
    const Mask b = random_mask(rng, 24, 24, 0.2);
    const auto m1 = metrics::evaluate_case(a, b, 1.0);
    const auto m2 = metrics::evaluate_case(a, b, 0.5);
    REQUIRE(m1.hd_mm.has_value());
    CHECK(*m2.hd_mm == 0.5 * *m1.hd_mm);
    CHECK(*m2.asd_mm == 0.5 * *m1.asd_mm);
    CHECK(*m2.dsc == *m1.dsc);
    CHECK(*m2.tpr == *m1.tpr);

    const double alpha = 3.7;
    const auto m3 = metrics::evaluate_case(a, b, alpha);
    CHECK(*m3.hd_mm == alpha * *m1.hd_mm);
    CHECK(*m3.asd_mm == alpha * *m1.asd_mm);
}
