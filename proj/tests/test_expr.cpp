// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "clbf/expr.hpp"
#include "clbf/parse.hpp"
#include "support.hpp"

namespace clbf {
namespace {

using testing::central_difference;
using testing::rel_err;

TEST(Differentiate, ConstantIsZero) {
    EXPECT_TRUE(differentiate(Expr(3.5), 0).is_constant(0.0));
    EXPECT_TRUE(differentiate(var(1), 0).is_constant(0.0));
    EXPECT_TRUE(differentiate(var(0), 0).is_constant(1.0));
}

TEST(Differentiate, SinGivesCos) {
    const Expr d = differentiate(sin(var(0)), 0);
    EXPECT_EQ(d, cos(var(0)));
}

TEST(Differentiate, SoftmaxBarrierMatchesFiniteDifferences) {
    const auto hs = lse(4.5, testing::toy_constraints());
    const std::vector<double> x{0.3, -0.5};
    for (int i = 0; i < 2; ++i) {
        const double sym = eval_point(differentiate(hs, i), x);
        const double fd = central_difference([&](const std::vector<double>& p) { return eval_point(hs, p); }, x,
                                             static_cast<std::size_t>(i), 1e-6);
        EXPECT_LE(rel_err(sym, fd), 1e-6) << "component " << i;
    }
    // Softmax-weighted sum of constraint gradients.
    const auto h = testing::toy_constraints();
    std::vector<double> a;
    for (const auto& e : h) a.push_back(eval_point(e, x));
    double want = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        want += softmax_weight_value(i, 4.5, a) * eval_point(differentiate(h[i], 0), x);
    }
    EXPECT_NEAR(eval_point(differentiate(hs, 0), x), want, 1e-14);
}

TEST(LieDerivatives, QuadraticOnToySystem) {
    const auto vf = testing::toy_field();
    const Expr V = parse_expr("x1^2 + 2*x2^2", 2);
    const auto ld = lie_derivatives(V, vf);
    ASSERT_EQ(ld.lg.size(), 1U);
    testing::RandomExpr gen(2, 7);
    for (int k = 0; k < 10; ++k) {
        const auto x = gen.point(-3.0, 3.0);
        EXPECT_NEAR(eval_point(ld.lf, x), -4.0 * x[1] * std::sin(x[0]), 1e-12);
        EXPECT_NEAR(eval_point(ld.lg[0], x), 2.0 * x[0] - 4.0 * x[1], 1e-12);
        // Finite differences of V along f and along g.
        const std::vector<double> fx{0.0, -std::sin(x[0])};
        const double step = 1e-6;
        auto along = [&](const std::vector<double>& dir) {
            std::vector<double> p = x;
            std::vector<double> m = x;
            for (std::size_t i = 0; i < 2; ++i) {
                p[i] += step * dir[i];
                m[i] -= step * dir[i];
            }
            return (eval_point(V, p) - eval_point(V, m)) / (2.0 * step);
        };
        EXPECT_NEAR(eval_point(ld.lf, x), along(fx), 1e-6 * (1.0 + std::abs(along(fx))));
        EXPECT_NEAR(eval_point(ld.lg[0], x), along({1.0, -1.0}), 1e-6 * (1.0 + std::abs(along({1.0, -1.0}))));
    }
}

TEST(LieDerivatives, ConstantScalarIsZero) {
    const auto ld = lie_derivatives(Expr(1.0), testing::toy_field());
    EXPECT_TRUE(ld.lf.is_constant(0.0));
    for (const auto& e : ld.lg) EXPECT_TRUE(e.is_constant(0.0));
}

TEST(LieDerivatives, SoftmaxBarrierAlongDrift) {
    const auto vf = testing::nonlinear_field();
    const Expr hs = lse(3.0, testing::nonlinear_constraints());
    const auto ld = lie_derivatives(hs, vf);
    testing::RandomExpr gen(2, 11);
    int checked = 0;
    for (int k = 0; k < 100; ++k) {
        const auto x = gen.point(-4.5, 4.5);
        std::vector<double> f{0.0, -x[0] + x[0] * x[0] * x[0] / 6.0};
        const double step = 1e-6;
        std::vector<double> p = x;
        std::vector<double> m = x;
        for (std::size_t i = 0; i < 2; ++i) {
            p[i] += step * f[i];
            m[i] -= step * f[i];
        }
        const double fd = (eval_point(hs, p) - eval_point(hs, m)) / (2.0 * step);
        const double sym = eval_point(ld.lf, x);
        if (std::abs(sym) < 1e-3) continue;
        EXPECT_LE(rel_err(sym, fd), 1e-6) << x[0] << "," << x[1];
        ++checked;
    }
    EXPECT_GT(checked, 50);
}

TEST(EvalPoint, ExampleValues) {
    const auto h = testing::toy_constraints();
    EXPECT_DOUBLE_EQ(eval_point(h[0], {0.0, 0.0}), -1.0);
    EXPECT_DOUBLE_EQ(eval_point(var(0) * var(1), {3.0, 4.0}), 12.0);
    const Expr single = lse(4.5, {h[0]});
    for (double a : {-2.0, 0.3, 1.7}) {
        EXPECT_EQ(eval_point(single, {a, 0.25}), eval_point(h[0], {a, 0.25}));
    }
}

TEST(EvalPoint, DomainErrors) {
    EXPECT_THROW(eval_point(log(var(0)), {-1.0}), DomainError);
    EXPECT_THROW(eval_point(log(var(0)), {0.0}), DomainError);
    EXPECT_THROW(eval_point(Expr(1.0) / var(0), {0.0}), DomainError);
}

TEST(EvalPoint, LargeTemperatureDoesNotOverflow) {
    const Expr hs = lse(10.0, {var(0) * 100.0, var(1) * 100.0});
    EXPECT_NEAR(eval_point(hs, {1.0, 0.5}), 100.0, 1e-12);
}

TEST(Simplify, LocalRewrites) {
    const Expr x = var(0);
    EXPECT_EQ(x * Expr(0.0), Expr(0.0));
    EXPECT_EQ(x + Expr(0.0), x);
    EXPECT_EQ(Expr(2.0) * Expr(3.0), Expr(6.0));
    EXPECT_EQ(-(-x), x);
    EXPECT_EQ(pow(x, 1), x);
}

TEST(Differentiate, RandomTreesAgreeWithFiniteDifferences) {
    testing::RandomExpr gen(3, 20240917);
    int checked = 0;
    int skipped = 0;
    for (int t = 0; t < 1000; ++t) {
        const Expr e = gen(6);
        const auto x = gen.point();
        const int i = static_cast<int>(t % 3);
        const double f0 = eval_point(e, x);
        if (!std::isfinite(f0) || std::abs(f0) > 1e6) {
            ++skipped;
            continue;
        }
        const double sym = eval_point(differentiate(e, i), x);
        if (std::abs(sym) <= 1e-3) continue;
        auto fn = [&](const std::vector<double>& p) { return eval_point(e, p); };
        const double fd = central_difference(fn, x, static_cast<std::size_t>(i), 1e-6);
        // The oracle is only trusted where steps h and 2h agree.
        const double fd2 = central_difference(fn, x, static_cast<std::size_t>(i), 2e-6);
        if (rel_err(fd, fd2) > 1e-6) {
            ++skipped;
            continue;
        }
        EXPECT_LE(rel_err(sym, fd), 1e-5) << to_string(e) << " at " << x[0] << "," << x[1] << "," << x[2];
        ++checked;
    }
    EXPECT_GT(checked, 400);
    EXPECT_LT(skipped, 200);
}

TEST(Differentiate, IsLinear) {
    testing::RandomExpr gen(2, 99);
    for (int t = 0; t < 20; ++t) {
        const Expr a = gen(4);
        const Expr b = gen(4);
        const Expr lhs = differentiate(a + b, 0);
        const Expr rhs = differentiate(a, 0) + differentiate(b, 0);
        for (int k = 0; k < 100; ++k) {
            const auto x = gen.point();
            const double l = eval_point(lhs, x);
            const double r = eval_point(rhs, x);
            EXPECT_NEAR(l, r, 1e-12 * std::max(1.0, std::abs(r)));
        }
    }
}

TEST(EvalPoint, Deterministic) {
    testing::RandomExpr gen(2, 5);
    const Expr e = gen(6);
    const auto x = gen.point();
    double a = 0.0;
    double b = 0.0;
    try {
        a = eval_point(e, x);
        b = eval_point(e, x);
    } catch (const DomainError&) {
        GTEST_SKIP();
    }
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a), std::bit_cast<std::uint64_t>(b));
}

TEST(VectorField, ValidatesShapes) {
    VectorField vf = testing::toy_field();
    EXPECT_NO_THROW(vf.validate());
    vf.g[0].push_back(Expr(0.0));
    EXPECT_THROW(vf.validate(), SpecError);
    VectorField bad = testing::toy_field();
    bad.f[0] = var(2);
    EXPECT_THROW(bad.validate(), SpecError);
}

}  // namespace
}  // namespace clbf
