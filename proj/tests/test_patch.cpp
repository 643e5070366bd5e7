// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "clbf/patch.hpp"
#include "support.hpp"

namespace clbf {
namespace {

constexpr double kPi = std::numbers::pi;
const IntervalBox kToyBox{{-kPi, kPi}, {-3.0, 4.0}};

// The bump written out, independent of the library.
double ref_bump(double h, double eps) {
    if (h >= 1.0) return 1.0;
    if (h <= 1.0 - eps) return 0.0;
    return std::exp(-1.0 / (eps * eps - (h - 1.0) * (h - 1.0)) + 1.0 / (eps * eps));
}

struct ToyPatch {
    Expr h = lse(4.5, testing::toy_constraints());
    Expr V = parse_expr("x1^2 + 2*x2^2", 2);
    double eps = 0.5;
    AlphaBound ab = compute_alpha(V, h, kToyBox, eps);
    PatchedCLBF W{h, V, eps, ab.alpha, 2};
};

const ToyPatch& toy() {
    static const ToyPatch p;
    return p;
}

std::vector<double> random_point(std::mt19937_64& rng, const IntervalBox& box) {
    std::vector<double> x(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) x[i] = std::uniform_real_distribution<double>(box[i].lo, box[i].hi)(rng);
    return x;
}

TEST(Bump, ClosedFormValues) {
    for (double eps : {0.1, 0.3, 0.5, 0.9}) {
        EXPECT_NEAR(bump(1.0 - eps / 2.0, eps), std::exp(-1.0 / (3.0 * eps * eps)), 1e-15) << eps;
        EXPECT_EQ(bump(1.0 - eps, eps), 0.0);
        EXPECT_EQ(bump(1.0 - 2.0 * eps, eps), 0.0);
        EXPECT_EQ(bump(1.0, eps), 1.0);
        EXPECT_EQ(bump(3.0, eps), 1.0);
    }
}

TEST(Bump, MonotoneOnBand) {
    const double eps = 0.4;
    double prev = 0.0;
    for (int k = 1; k < 1000; ++k) {
        const double b = bump(1.0 - eps + eps * k / 1000.0, eps);
        EXPECT_GE(b, prev);
        prev = b;
    }
}

TEST(Bump, DerivativeMatchesFiniteDifferences) {
    for (double eps : {0.2, 0.5}) {
        for (int k = 1; k < 100; ++k) {
            const double h = 1.0 - eps + eps * k / 100.0;
            const double fd = (ref_bump(h + 1e-6, eps) - ref_bump(h - 1e-6, eps)) / 2e-6;
            const double d = bump_derivative(h, eps);
            EXPECT_LE(std::abs(d - fd), 1e-5 * std::max(1.0, std::abs(fd))) << eps << " " << h;
        }
    }
}

TEST(Bump, DerivativeVanishesAtBandEdges) {
    const double eps = 0.5;
    EXPECT_EQ(bump_derivative(1.0 - eps, eps), 0.0);
    EXPECT_EQ(bump_derivative(1.0, eps), 0.0);
    EXPECT_LT(bump_derivative(1.0 - eps + 1e-3, eps), 1e-100);
    EXPECT_LT(bump_derivative(1.0 - 1e-7, eps), 1e-5);
}

TEST(Bump, ExpressionAgreesInBand) {
    const double eps = 0.35;
    const Expr b = bump_expr(var(0), eps);
    for (int k = 1; k < 50; ++k) {
        const double h = 1.0 - eps + eps * k / 50.0;
        EXPECT_NEAR(eval_point(b, {h}), ref_bump(h, eps), 1e-14);
    }
}

TEST(Alpha, UnitDisk) {
    const Expr r2 = parse_expr("x1^2 + x2^2", 2);
    const IntervalBox box{{-2.0, 2.0}, {-2.0, 2.0}};
    const AlphaBound ab = compute_alpha(r2, r2, box, 0.5);
    EXPECT_GE(ab.upper, 1.0);
    EXPECT_LE(ab.upper, 1.01);
    EXPECT_LE(ab.lower, 1.0);
    EXPECT_LE(ab.upper - ab.lower, 0.01 * ab.lower + 1e-12);
    EXPECT_DOUBLE_EQ(ab.alpha, 0.5 / ab.upper);
    EXPECT_GE(ab.alpha, 0.495);
    EXPECT_LE(ab.alpha, 0.5);
}

TEST(Alpha, ScalesWithV) {
    const Expr h = parse_expr("x1^2 / 4 + x2^2", 2);
    const IntervalBox box{{-3.0, 3.0}, {-3.0, 3.0}};
    // max of x1^2 + x2^2 on the ellipse is 4.
    const AlphaBound one = compute_alpha(parse_expr("x1^2 + x2^2", 2), h, box, 0.25);
    const AlphaBound three = compute_alpha(parse_expr("3*x1^2 + 3*x2^2", 2), h, box, 0.25);
    EXPECT_GE(one.upper, 4.0);
    EXPECT_LE(one.upper, 4.04);
    EXPECT_GE(three.upper, 12.0);
    EXPECT_LE(three.upper, 12.12);
    // alpha V is invariant under scaling V, up to the bound gap.
    EXPECT_NEAR(3.0 * three.alpha, one.alpha, 0.01 * one.alpha);
}

TEST(Alpha, DeterministicAndErrors) {
    const AlphaBound a = compute_alpha(toy().V, toy().h, kToyBox, 0.5);
    EXPECT_EQ(a.alpha, toy().ab.alpha);
    EXPECT_EQ(a.boxes, toy().ab.boxes);
    const IntervalBox box{{-1.0, 1.0}, {-1.0, 1.0}};
    EXPECT_THROW(compute_alpha(parse_expr("x1^2", 2), parse_expr("5 + x1^2", 2), box, 0.5), EmptySafeSet);
    EXPECT_THROW(compute_alpha(parse_expr("x1^2", 2), parse_expr("x1^2", 2), box, 1.0), std::invalid_argument);
    EXPECT_THROW(compute_alpha(parse_expr("x1^2 + x2^2", 2), parse_expr("x1^2 + x2^2", 2), box, 0.5, 0.0, 10),
                 ResourceExhausted);
}

TEST(Patch, RejectsBandContainingOrigin) {
    const Expr h = parse_expr("0.6 + x1^2 + x2^2", 2);
    const Expr V = parse_expr("x1^2 + x2^2", 2);
    EXPECT_THROW(PatchedCLBF(h, V, 0.5, 1.0, 2), SpecError);
    EXPECT_NO_THROW(PatchedCLBF(h, V, 0.3, 1.0, 2));
}

TEST(Patch, RegionFormulas) {
    const ToyPatch& p = toy();
    std::mt19937_64 rng(2);
    int counts[3] = {0, 0, 0};
    for (int k = 0; k < 4000; ++k) {
        const auto x = random_point(rng, kToyBox);
        const double h = eval_point(p.h, x);
        const double v = eval_point(p.V, x);
        const auto e = p.W.evaluate(x);
        const double b = ref_bump(h, p.eps);
        const double want = (1.0 - b) * p.ab.alpha * v + b * h;
        EXPECT_NEAR(e.W, want, 1e-12 * (1.0 + std::abs(want)));
        const Region r = h >= 1.0 ? Region::Outside : (h <= 1.0 - p.eps ? Region::Inside : Region::Band);
        EXPECT_EQ(e.region, r);
        EXPECT_NEAR(eval_point(p.W.W(r), x), want, 1e-12 * (1.0 + std::abs(want)));
        ++counts[static_cast<int>(r)];
    }
    for (int c : counts) EXPECT_GT(c, 100);
}

TEST(Patch, GradientMatchesFiniteDifferences) {
    const ToyPatch& p = toy();
    std::mt19937_64 rng(3);
    auto W = [&](const std::vector<double>& x) { return p.W.value(x); };
    int checked = 0;
    for (int k = 0; k < 1000; ++k) {
        const auto x = random_point(rng, kToyBox);
        const auto g = p.W.grad(x);
        for (std::size_t i = 0; i < 2; ++i) {
            const double fd = testing::central_difference(W, x, i, 1e-6);
            if (std::abs(fd) <= 1e-3) continue;
            EXPECT_LE(testing::rel_err(g[i], fd), 1e-5) << x[0] << ", " << x[1];
            ++checked;
        }
        const Region r = p.W.region(x);
        const auto& sym = p.W.grad_W(r);
        for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(eval_point(sym[i], x), g[i], 1e-9 * (1.0 + std::abs(g[i])));
    }
    EXPECT_GT(checked, 1000);
}

// Point on the ray from the origin in direction (c, s) where h = level.
std::vector<double> on_level(const ToyPatch& p, double a, double level) {
    const double c = std::cos(a), s = std::sin(a);
    double lo = 0.0, hi = 0.0;
    for (double t = 0.01;; t += 0.01) {
        if (eval_point(p.h, {t * c, t * s}) >= level) {
            hi = t;
            break;
        }
        lo = t;
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (eval_point(p.h, {mid * c, mid * s}) < level ? lo : hi) = mid;
    }
    return {lo * c, lo * s};
}

TEST(Patch, ContinuousAcrossRegionBoundaries) {
    const ToyPatch& p = toy();
    for (int k = 0; k < 36; ++k) {
        const double a = 2.0 * kPi * k / 36.0;
        for (double level : {1.0 - p.eps, 1.0}) {
            const auto x = on_level(p, a, level);
            const double n = std::hypot(x[0], x[1]);
            const std::vector<double> in{x[0] * (1.0 - 1e-9 / n), x[1] * (1.0 - 1e-9 / n)};
            const std::vector<double> out{x[0] * (1.0 + 1e-9 / n), x[1] * (1.0 + 1e-9 / n)};
            EXPECT_NEAR(p.W.value(in), p.W.value(out), 1e-7);
            const auto gi = p.W.grad(in);
            const auto go = p.W.grad(out);
            for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(gi[i], go[i], 1e-6);
        }
    }
}

TEST(Patch, LevelSetMatchesBarrier) {
    const ToyPatch& p = toy();
    const int r = 200;
    int mismatches = 0;
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            const std::vector<double> x{-kPi + 2.0 * kPi * i / (r - 1), -3.0 + 7.0 * j / (r - 1)};
            const auto e = p.W.evaluate(x);
            if (std::abs(e.h - 1.0) <= 1e-6) continue;
            mismatches += ((e.W > 1.0) != (e.h > 1.0)) ? 1 : 0;
        }
    }
    EXPECT_EQ(mismatches, 0);
}

TEST(Patch, BandValueBetweenItsParts) {
    const ToyPatch& p = toy();
    std::mt19937_64 rng(4);
    int band = 0;
    for (int k = 0; k < 20000 && band < 500; ++k) {
        const auto x = random_point(rng, kToyBox);
        const auto e = p.W.evaluate(x);
        if (e.region != Region::Band) continue;
        ++band;
        const double a = p.ab.alpha * e.V;
        EXPECT_GE(e.W, std::min(a, e.h) - 1e-12);
        EXPECT_LE(e.W, std::max(a, e.h) + 1e-12);
        // alpha V <= 1 - eps < h on the band, so W < 1 there.
        EXPECT_LT(e.W, 1.0);
    }
    EXPECT_EQ(band, 500);
}

TEST(Patch, StrictDecreaseIsAvailable) {
    // Some input decreases W at every sampled nonzero state of C: either
    // L_g W != 0 or L_f W < 0. Checked with the bang input u = -1e6 sign(L_g W).
    const ToyPatch& p = toy();
    std::mt19937_64 rng(6);
    int sampled = 0;
    for (int k = 0; k < 20000 && sampled < 2000; ++k) {
        const auto x = random_point(rng, kToyBox);
        if (std::hypot(x[0], x[1]) < 1e-2 || eval_point(p.h, x) > 1.0) continue;
        ++sampled;
        const auto g = p.W.grad(x);
        const double lf = g[1] * -std::sin(x[0]);
        const double lg = g[0] - g[1];
        EXPECT_LT(lf - 1e6 * std::abs(lg), 0.0) << x[0] << ", " << x[1];
    }
    EXPECT_EQ(sampled, 2000);
}

TEST(Patch, RegionNames) {
    EXPECT_STREQ(region_name(Region::Inside), "inside");
    EXPECT_STREQ(region_name(Region::Band), "band");
    EXPECT_STREQ(region_name(Region::Outside), "outside");
    const ToyPatch& p = toy();
    EXPECT_EQ(p.W.region_of_h(0.0), Region::Inside);
    EXPECT_EQ(p.W.region_of_h(0.75), Region::Band);
    EXPECT_EQ(p.W.region_of_h(1.0), Region::Outside);
}

}  // namespace
}  // namespace clbf
