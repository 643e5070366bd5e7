// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "clbf/errors.hpp"

namespace clbf {

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr double kTiny = std::numeric_limits<double>::denorm_min();
inline constexpr double kMax = std::numeric_limits<double>::max();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Outward padding: `ulps` multiples of the relative machine epsilon plus one
// denormal. An overflowed lower bound is pulled back to the largest finite
// double since every enclosed quantity is a finite real.
inline double down(double x, double ulps = 4.0) {
    if (std::isnan(x)) return -kInf;
    if (x == kInf) return kMax;
    if (x == -kInf) return x;
    return x - (std::abs(x) * ulps * kEps + kTiny);
}

inline double up(double x, double ulps = 4.0) {
    if (std::isnan(x)) return kInf;
    if (x == -kInf) return -kMax;
    if (x == kInf) return x;
    return x + (std::abs(x) * ulps * kEps + kTiny);
}

// 0 * inf is taken as 0: an unbounded factor times an exact zero.
inline double mul_raw(double a, double b) {
    if (a == 0.0 || b == 0.0) return 0.0;
    return a * b;
}

inline double ipow(double v, unsigned k) {
    double r = 1.0;
    double base = v;
    while (k != 0) {
        if (k & 1U) r *= base;
        k >>= 1U;
        if (k != 0) base *= base;
    }
    return r;
}

// True when c + 2*pi*k lies in [lo, hi] for some integer k. The test is
// widened slightly so that rounding in pi can only add critical points.
inline bool hits_periodic(double lo, double hi, double c) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double tol = 1e-12 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
    const double k = std::ceil((lo - tol - c) / two_pi);
    return c + two_pi * k <= hi + tol;
}

}  // namespace detail

/// Closed real interval [lo, hi]. The empty interval is the NaN pair.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    constexpr Interval() = default;
    constexpr Interval(double v) : lo(v), hi(v) {}  // NOLINT(google-explicit-constructor)
    constexpr Interval(double l, double h) : lo(l), hi(h) {}

    static constexpr Interval empty() {
        return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    static constexpr Interval entire() { return {-detail::kInf, detail::kInf}; }

    [[nodiscard]] bool is_empty() const { return std::isnan(lo) || std::isnan(hi); }
    [[nodiscard]] double width() const { return hi - lo; }
    [[nodiscard]] double mid() const {
        if (lo == -detail::kInf && hi == detail::kInf) return 0.0;
        if (lo == -detail::kInf) return -detail::kMax;
        if (hi == detail::kInf) return detail::kMax;
        return lo + 0.5 * (hi - lo);
    }
    [[nodiscard]] bool contains(double v) const { return lo <= v && v <= hi; }
    [[nodiscard]] bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
    [[nodiscard]] bool is_finite() const { return std::isfinite(lo) && std::isfinite(hi); }

    friend bool operator==(const Interval&, const Interval&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Interval& x) {
    if (x.is_empty()) return os << "[empty]";
    return os << '[' << x.lo << ", " << x.hi << ']';
}

inline Interval intersect(const Interval& a, const Interval& b) {
    if (a.is_empty() || b.is_empty()) return Interval::empty();
    const double lo = std::max(a.lo, b.lo);
    const double hi = std::min(a.hi, b.hi);
    if (lo > hi) return Interval::empty();
    return {lo, hi};
}

inline Interval hull(const Interval& a, const Interval& b) {
    if (a.is_empty()) return b;
    if (b.is_empty()) return a;
    return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator+(const Interval& a, const Interval& b) {
    return {detail::down(a.lo + b.lo), detail::up(a.hi + b.hi)};
}

inline Interval operator-(const Interval& a, const Interval& b) {
    return {detail::down(a.lo - b.hi), detail::up(a.hi - b.lo)};
}

inline Interval operator*(const Interval& a, const Interval& b) {
    if (a.lo == a.hi && b.lo == b.hi) {
        const double p = detail::mul_raw(a.lo, b.lo);
        return {detail::down(p), detail::up(p)};
    }
    const double p[4] = {detail::mul_raw(a.lo, b.lo), detail::mul_raw(a.lo, b.hi),
                         detail::mul_raw(a.hi, b.lo), detail::mul_raw(a.hi, b.hi)};
    return {detail::down(*std::min_element(p, p + 4)), detail::up(*std::max_element(p, p + 4))};
}

inline Interval operator/(const Interval& a, const Interval& b) {
    if (b.lo <= 0.0 && b.hi >= 0.0) throw DomainError("interval division by an enclosure containing zero");
    const double inv_lo = 1.0 / b.hi;
    const double inv_hi = 1.0 / b.lo;
    return a * Interval{detail::down(inv_lo), detail::up(inv_hi)};
}

inline Interval& operator+=(Interval& a, const Interval& b) { return a = a + b; }
inline Interval& operator*=(Interval& a, const Interval& b) { return a = a * b; }

inline Interval exp(const Interval& x) {
    return {std::max(0.0, detail::down(std::exp(x.lo))), detail::up(std::exp(x.hi))};
}

inline Interval log(const Interval& x) {
    if (!(x.lo > 0.0)) throw DomainError("log of an enclosure reaching non-positive values");
    return {detail::down(std::log(x.lo)), detail::up(std::log(x.hi))};
}

inline Interval sin(const Interval& x) {
    if (!x.is_finite() || x.width() >= 2.0 * std::numbers::pi) return {-1.0, 1.0};
    const double a = std::sin(x.lo);
    const double b = std::sin(x.hi);
    double lo = detail::down(std::min(a, b));
    double hi = detail::up(std::max(a, b));
    if (detail::hits_periodic(x.lo, x.hi, 0.5 * std::numbers::pi)) hi = 1.0;
    if (detail::hits_periodic(x.lo, x.hi, -0.5 * std::numbers::pi)) lo = -1.0;
    return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

inline Interval cos(const Interval& x) {
    if (!x.is_finite() || x.width() >= 2.0 * std::numbers::pi) return {-1.0, 1.0};
    const double a = std::cos(x.lo);
    const double b = std::cos(x.hi);
    double lo = detail::down(std::min(a, b));
    double hi = detail::up(std::max(a, b));
    if (detail::hits_periodic(x.lo, x.hi, 0.0)) hi = 1.0;
    if (detail::hits_periodic(x.lo, x.hi, std::numbers::pi)) lo = -1.0;
    return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

/// Integer power with the even-power enclosure rule.
inline Interval pow(const Interval& x, unsigned k) {
    if (k == 0) return {1.0, 1.0};
    if (k == 1) return x;
    const double ulps = 4.0 * (k + 1);
    const double a = detail::ipow(x.lo, k);
    const double b = detail::ipow(x.hi, k);
    if (k % 2 == 1) return {detail::down(a, ulps), detail::up(b, ulps)};
    if (x.lo >= 0.0) return {detail::down(a, ulps), detail::up(b, ulps)};
    if (x.hi <= 0.0) return {detail::down(b, ulps), detail::up(a, ulps)};
    return {0.0, detail::up(std::max(a, b), ulps)};
}

// ---------------------------------------------------------------------------
// Log-sum-exp and softmax weights. Both are evaluated with the max shift, and
// the interval forms use monotonicity so the enclosures are exact up to
// padding.

/// (1/tau) log sum_i exp(tau a_i), shifted by max a_i.
inline double lse_value(double tau, std::span<const double> a) {
    double m = -detail::kInf;
    for (double v : a) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : a) s += std::exp(tau * (v - m));
    return m + std::log(s) / tau;
}

/// exp(tau a_i) / sum_j exp(tau a_j).
inline double softmax_weight_value(std::size_t i, double tau, std::span<const double> a) {
    double m = -detail::kInf;
    for (double v : a) m = std::max(m, v);
    double s = 0.0;
    for (double v : a) s += std::exp(tau * (v - m));
    return std::exp(tau * (a[i] - m)) / s;
}

inline Interval lse(double tau, std::span<const Interval> args) {
    std::vector<double> lo(args.size());
    std::vector<double> hi(args.size());
    double scale = 1.0;
    for (std::size_t i = 0; i < args.size(); ++i) {
        lo[i] = args[i].lo;
        hi[i] = args[i].hi;
        scale = std::max({scale, std::isfinite(lo[i]) ? std::abs(lo[i]) : 0.0,
                          std::isfinite(hi[i]) ? std::abs(hi[i]) : 0.0});
    }
    const double pad = 64.0 * detail::kEps * (scale + static_cast<double>(args.size()) / tau);
    const double l = lse_value(tau, lo);
    const double h = lse_value(tau, hi);
    return {std::isfinite(l) ? l - pad : detail::down(l), std::isfinite(h) ? h + pad : detail::up(h)};
}

inline Interval softmax_weight(std::size_t i, double tau, std::span<const Interval> args) {
    // w_i = 1 / (1 + sum_{j != i} exp(tau (a_j - a_i))): increasing in a_i,
    // decreasing in every other a_j.
    double s_lo = 0.0;  // denominator sum at the configuration minimizing w_i
    double s_hi = 0.0;
    for (std::size_t j = 0; j < args.size(); ++j) {
        if (j == i) continue;
        const double e_min = std::exp(tau * (args[j].hi - args[i].lo));
        const double e_max = std::exp(tau * (args[j].lo - args[i].hi));
        s_lo += std::isnan(e_min) ? detail::kInf : e_min;
        s_hi += std::isnan(e_max) ? 0.0 : e_max;
    }
    const double ulps = 8.0 * static_cast<double>(args.size() + 2);
    const double w_lo = 1.0 / (1.0 + s_lo);
    const double w_hi = 1.0 / (1.0 + s_hi);
    return {std::max(0.0, detail::down(w_lo, ulps)), std::min(1.0, detail::up(w_hi, ulps))};
}

// ---------------------------------------------------------------------------

/// Axis-aligned box, one interval per coordinate.
class IntervalBox {
public:
    IntervalBox() = default;
    explicit IntervalBox(std::vector<Interval> dims) : dims_(std::move(dims)) {}
    IntervalBox(std::initializer_list<Interval> dims) : dims_(dims) {}

    [[nodiscard]] std::size_t size() const { return dims_.size(); }
    Interval& operator[](std::size_t i) { return dims_[i]; }
    const Interval& operator[](std::size_t i) const { return dims_[i]; }
    [[nodiscard]] std::span<const Interval> dims() const { return dims_; }
    [[nodiscard]] std::span<Interval> dims() { return dims_; }

    [[nodiscard]] double width() const {
        double w = 0.0;
        for (const auto& d : dims_) w = std::max(w, d.width());
        return w;
    }

    /// Index of the widest coordinate; the lowest index wins ties.
    [[nodiscard]] std::size_t widest_dim() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < dims_.size(); ++i) {
            if (dims_[i].width() > dims_[best].width()) best = i;
        }
        return best;
    }

    [[nodiscard]] std::vector<double> midpoint() const {
        std::vector<double> m(dims_.size());
        for (std::size_t i = 0; i < dims_.size(); ++i) m[i] = dims_[i].mid();
        return m;
    }

    [[nodiscard]] bool contains(std::span<const double> x) const {
        if (x.size() != dims_.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!dims_[i].contains(x[i])) return false;
        }
        return true;
    }

    [[nodiscard]] bool contains(const IntervalBox& o) const {
        if (o.size() != size()) return false;
        for (std::size_t i = 0; i < size(); ++i) {
            if (!dims_[i].contains(o[i])) return false;
        }
        return true;
    }

    [[nodiscard]] bool is_empty() const {
        return std::any_of(dims_.begin(), dims_.end(), [](const Interval& d) { return d.is_empty(); });
    }

    friend bool operator==(const IntervalBox&, const IntervalBox&) = default;

private:
    std::vector<Interval> dims_;
};

inline std::ostream& operator<<(std::ostream& os, const IntervalBox& b) {
    for (std::size_t i = 0; i < b.size(); ++i) os << (i ? " x " : "") << b[i];
    return os;
}

/// Bisects the widest coordinate at its midpoint; the lower half comes first.
inline std::pair<IntervalBox, IntervalBox> split(const IntervalBox& box) {
    const std::size_t d = box.widest_dim();
    const double m = box[d].mid();
    IntervalBox lower = box;
    IntervalBox upper = box;
    lower[d].hi = m;
    upper[d].lo = m;
    return {std::move(lower), std::move(upper)};
}

}  // namespace clbf
