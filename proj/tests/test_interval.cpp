// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "clbf/interval.hpp"
#include "clbf/tape.hpp"
#include "support.hpp"

namespace clbf {
namespace {

TEST(Interval, EvenPower) {
    const Interval r = eval_interval(pow(var(0), 2), IntervalBox{{-2.0, 3.0}});
    EXPECT_EQ(r.lo, 0.0);
    EXPECT_GE(r.hi, 9.0);
    EXPECT_LE(r.hi, 9.0 + 1e-12);
}

TEST(Interval, SinOnHalfPeriod) {
    const Interval r = eval_interval(sin(var(0)), IntervalBox{{0.0, std::numbers::pi}});
    EXPECT_LE(r.lo, 0.0);
    EXPECT_GE(r.lo, -1e-15);
    EXPECT_EQ(r.hi, 1.0);
}

TEST(Interval, CosCriticalPoints) {
    const Interval r = cos(Interval{-0.5, 3.5});
    EXPECT_EQ(r.lo, -1.0);
    EXPECT_EQ(r.hi, 1.0);
    const Interval s = cos(Interval{0.5, 1.0});
    EXPECT_LE(s.lo, std::cos(1.0));
    EXPECT_GE(s.hi, std::cos(0.5));
    EXPECT_LT(s.hi, 0.9);
}

TEST(Interval, DivisionByZeroEnclosure) {
    EXPECT_THROW(Interval(1.0) / Interval(-1.0, 1.0), DomainError);
    EXPECT_THROW(eval_interval(log(var(0)), IntervalBox{{-1.0, 2.0}}), DomainError);
    EXPECT_NO_THROW(eval_interval(log(var(0)), IntervalBox{{0.5, 2.0}}));
}

TEST(Interval, SoftmaxBarrierContainsPointValues) {
    const Expr hs = lse(4.5, testing::toy_constraints());
    const Tape tape({hs}, 2);
    EXPECT_TRUE(tape.eval(IntervalBox{{-0.1, 0.1}, {-0.1, 0.1}})[0].contains(eval_point(hs, {0.0, 0.0})));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> c(-0.1, 0.1);
    std::uniform_real_distribution<double> w(0.0, 0.05);
    for (int b = 0; b < 100; ++b) {
        const double cx = c(rng);
        const double cy = c(rng);
        const double wx = w(rng);
        const double wy = w(rng);
        const IntervalBox box{{cx - wx, cx + wx}, {cy - wy, cy + wy}};
        const Interval enc = tape.eval(box)[0];
        std::uniform_real_distribution<double> px(cx - wx, cx + wx);
        std::uniform_real_distribution<double> py(cy - wy, cy + wy);
        for (int k = 0; k < 100; ++k) {
            const double v = eval_point(hs, {px(rng), py(rng)});
            ASSERT_TRUE(enc.contains(v)) << enc << " misses " << v;
        }
    }
}

TEST(Interval, OverflowSafeSmoothMax) {
    // tau = 10 over [-10, 10]^2 drives exp(tau h) far past the double range
    // without the max shift.
    const Expr hs = lse(10.0, {var(0) * 80.0, var(1) * 80.0, -var(0) - var(1)});
    const Interval r = eval_interval(hs, IntervalBox{{-10.0, 10.0}, {-10.0, 10.0}});
    EXPECT_TRUE(r.is_finite());
    EXPECT_LE(r.lo, -10.0);
    EXPECT_GE(r.hi, 800.0);
}

TEST(Interval, EnclosureSoundnessFuzz) {
    testing::RandomExpr gen(2, 42);
    std::mt19937_64& rng = gen.rng();
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    std::uniform_real_distribution<double> w(0.0, 1.0);
    int checked = 0;
    for (int t = 0; t < 10000; ++t) {
        const Expr e = gen(5);
        const double cx = c(rng);
        const double cy = c(rng);
        const double wx = w(rng);
        const double wy = w(rng);
        const IntervalBox box{{cx - wx, cx + wx}, {cy - wy, cy + wy}};
        const double px = std::uniform_real_distribution<double>(cx - wx, cx + wx)(rng);
        const double py = std::uniform_real_distribution<double>(cy - wy, cy + wy)(rng);
        const double v = eval_point(e, {px, py});
        const Interval enc = eval_interval(e, box);
        if (!std::isfinite(v)) continue;
        ASSERT_TRUE(enc.contains(v)) << to_string(e) << " on " << box << ": " << enc << " misses " << v;
        ++checked;
    }
    EXPECT_GT(checked, 9000);
}

TEST(Interval, MonotoneUnderInclusion) {
    testing::RandomExpr gen(2, 43);
    for (int t = 0; t < 500; ++t) {
        const Expr e = gen(5);
        const IntervalBox outer{{-1.0, 1.5}, {-0.5, 2.0}};
        const IntervalBox inner{{-0.25, 0.5}, {0.0, 1.0}};
        const Interval a = eval_interval(e, inner);
        const Interval b = eval_interval(e, outer);
        const double slack = 1e-9 * (1.0 + std::abs(b.lo) + std::abs(b.hi));
        EXPECT_GE(a.lo, b.lo - slack) << to_string(e);
        EXPECT_LE(a.hi, b.hi + slack) << to_string(e);
    }
}

TEST(Split, WidestDimensionAtMidpoint) {
    const auto [a, b] = split(IntervalBox{{0.0, 4.0}, {0.0, 1.0}});
    EXPECT_EQ(a, (IntervalBox{{0.0, 2.0}, {0.0, 1.0}}));
    EXPECT_EQ(b, (IntervalBox{{2.0, 4.0}, {0.0, 1.0}}));
    const auto [c, d] = split(IntervalBox{{1.0, 1.0}, {0.0, 2.0}});
    EXPECT_EQ(c, (IntervalBox{{1.0, 1.0}, {0.0, 1.0}}));
    EXPECT_EQ(d, (IntervalBox{{1.0, 1.0}, {1.0, 2.0}}));
}

TEST(Split, RepeatedHalving) {
    IntervalBox box{{0.0, 1.0}};
    for (int k = 1; k <= 20; ++k) {
        box = split(box).first;
        EXPECT_EQ(box.width(), std::ldexp(1.0, -k));
    }
}

TEST(Split, ChildrenPartitionParent) {
    const IntervalBox p{{-1.0, 3.0}, {0.5, 0.75}, {2.0, 5.0}};
    const auto [a, b] = split(p);
    const std::size_t d = p.widest_dim();
    EXPECT_EQ(a[d].width() + b[d].width(), p[d].width());
    EXPECT_EQ(a[d].hi, b[d].lo);
    EXPECT_TRUE(p.contains(a));
    EXPECT_TRUE(p.contains(b));
}

TEST(Tape, ContractionKeepsSolutions) {
    // x1^2 + x2^2 = 1 and x1 - x2 = 0 on [-2, 2]^2.
    const Tape t({pow(var(0), 2) + pow(var(1), 2), var(0) - var(1)}, 2);
    IntervalBox box{{0.0, 2.0}, {-2.0, 2.0}};
    std::vector<Interval> s;
    std::vector<Interval> f;
    const std::vector<Interval> ranges{Interval(1.0), Interval(0.0)};
    ASSERT_TRUE(t.contract(box, ranges, s, f));
    const double r = std::sqrt(0.5);
    EXPECT_TRUE(box.contains(std::vector<double>{r, r}));
    EXPECT_LE(box[1].lo, r);
    EXPECT_GE(box[1].lo, -1e-9);  // x2 = x1 >= 0
    IntervalBox away{{1.5, 2.0}, {-2.0, 2.0}};
    EXPECT_FALSE(t.contract(away, ranges, s, f));
}

}  // namespace
}  // namespace clbf
