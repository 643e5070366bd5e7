// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Patched Lyapunov-barrier function
//
//     W = (1 - b) alpha V + b h,   b = bump(h; eps),
//
// equal to alpha V on {h <= 1 - eps}, to h on {h >= 1}, and blended on the band
// in between. alpha = (1 - eps) / U with U an upper bound of V on {h <= 1}.

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "clbf/errors.hpp"
#include "clbf/expr.hpp"
#include "clbf/interval.hpp"
#include "clbf/tape.hpp"

namespace clbf {

/// Below this, eps^2 - (h - 1)^2 is treated as zero (b = 0, b' = 0).
inline constexpr double kBumpFloor = 1e-12;

inline double bump(double h, double eps) {
    if (h >= 1.0) return 1.0;
    if (h <= 1.0 - eps) return 0.0;
    const double q = eps * eps - (h - 1.0) * (h - 1.0);
    if (q < kBumpFloor) return 0.0;
    return std::exp(-1.0 / q + 1.0 / (eps * eps));
}

/// d bump / dh.
inline double bump_derivative(double h, double eps) {
    if (h >= 1.0 || h <= 1.0 - eps) return 0.0;
    const double q = eps * eps - (h - 1.0) * (h - 1.0);
    if (q < kBumpFloor) return 0.0;
    return bump(h, eps) * 2.0 * (1.0 - h) / (q * q);
}

/// Band formula of the bump as an expression in h.
inline Expr bump_expr(const Expr& h, double eps) {
    return exp(Expr(-1.0) / (Expr(eps * eps) - pow(h - Expr(1.0), 2)) + Expr(1.0 / (eps * eps)));
}

struct AlphaBound {
    double alpha = 0.0;
    /// Verified upper bound of V on {h <= 1}.
    double upper = 0.0;
    /// Largest V found at a point of {h <= 1}.
    double lower = 0.0;
    std::uint64_t boxes = 0;
};

/// Best-first branch-and-bound for max V over {x in box : h(x) <= 1}, stopped
/// once upper <= (1 + gap) * lower.
inline AlphaBound compute_alpha(const Expr& V, const Expr& h, const IntervalBox& box, double eps, double gap = 0.01,
                                std::uint64_t budget = 2'000'000) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("compute_alpha: eps must lie in (0, 1)");
    const Tape tape({V, h}, box.size());
    struct Item {
        double ub;
        std::uint64_t order;
        IntervalBox box;
        bool operator<(const Item& o) const { return ub < o.ub || (ub == o.ub && order > o.order); }
    };
    std::priority_queue<Item> queue;
    std::uint64_t counter = 0;
    double lower = -detail::kInf;
    AlphaBound out;
    auto push = [&](IntervalBox b) {
        ++out.boxes;
        const auto enc = tape.eval(b);
        if (enc[1].lo > 1.0) return;
        const auto mid = b.midpoint();
        const auto v = tape.eval(mid);
        if (v[1] <= 1.0) lower = std::max(lower, v[0]);
        queue.push({enc[0].hi, counter++, std::move(b)});
    };
    push(box);
    while (!queue.empty()) {
        const double ub = queue.top().ub;
        if (lower > 0.0 && ub - lower <= gap * lower) break;
        if (out.boxes >= budget) throw ResourceExhausted("compute_alpha: box budget exhausted");
        IntervalBox b = queue.top().box;
        queue.pop();
        if (b.width() < 1e-9) {
            queue.push({ub, counter++, std::move(b)});
            break;
        }
        auto [lo, hi] = split(b);
        push(std::move(lo));
        push(std::move(hi));
    }
    if (queue.empty()) throw EmptySafeSet("{h <= 1} does not meet the domain box");
    out.upper = queue.top().ub;
    out.lower = lower;
    if (!(out.upper > 0.0)) throw EmptySafeSet("V has no positive values on {h <= 1}");
    out.alpha = (1.0 - eps) / out.upper;
    return out;
}

enum class Region { Inside = 0, Band = 1, Outside = 2 };

inline const char* region_name(Region r) {
    switch (r) {
        case Region::Inside: return "inside";
        case Region::Band: return "band";
        case Region::Outside: return "outside";
    }
    return "?";
}

class PatchedCLBF {
public:
    PatchedCLBF() = default;

    PatchedCLBF(Expr h, Expr V, double eps, double alpha, int n)
        : h_(std::move(h)), V_(std::move(V)), eps_(eps), alpha_(alpha), n_(n) {
        if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("patch: eps must lie in (0, 1)");
        if (!(alpha > 0.0)) throw std::invalid_argument("patch: alpha must be positive");
        const std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
        const double h0 = eval_point(h_, zero);
        if (!(h0 < 1.0 - eps)) {
            throw SpecError("band {" + std::to_string(1.0 - eps) + " <= h <= 1} contains the origin (h(0) = " +
                            std::to_string(h0) + ")");
        }
        V2_ = Expr(alpha) * V_;
        const Expr b = bump_expr(h_, eps);
        W_[0] = V2_;
        W_[1] = (Expr(1.0) - b) * V2_ + b * h_;
        W_[2] = h_;
        for (int r = 0; r < 3; ++r) grad_[static_cast<std::size_t>(r)] = gradient(W_[static_cast<std::size_t>(r)], n);
        std::vector<Expr> outs{h_, V_};
        for (const auto& e : gradient(h_, n)) outs.push_back(e);
        for (const auto& e : gradient(V_, n)) outs.push_back(e);
        tape_ = Tape(outs, static_cast<std::size_t>(n));
    }

    [[nodiscard]] const Expr& h() const { return h_; }
    [[nodiscard]] const Expr& V() const { return V_; }
    [[nodiscard]] const Expr& V2() const { return V2_; }
    [[nodiscard]] double epsilon() const { return eps_; }
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] int dim() const { return n_; }

    /// Region-wise closed forms of W and its gradient.
    [[nodiscard]] const Expr& W(Region r) const { return W_[static_cast<std::size_t>(r)]; }
    [[nodiscard]] const std::vector<Expr>& grad_W(Region r) const { return grad_[static_cast<std::size_t>(r)]; }

    [[nodiscard]] Region region_of_h(double hv) const {
        if (hv >= 1.0) return Region::Outside;
        if (hv <= 1.0 - eps_) return Region::Inside;
        return Region::Band;
    }

    [[nodiscard]] Region region(std::span<const double> x) const { return region_of_h(tape_.eval(x)[0]); }

    struct Eval {
        double h = 0.0;
        double V = 0.0;
        double W = 0.0;
        double b = 0.0;
        Region region = Region::Inside;
        std::vector<double> grad;
    };

    /// W and its gradient at x, with the band derivative b' grad h term.
    [[nodiscard]] Eval evaluate(std::span<const double> x) const {
        const auto v = tape_.eval(x);
        const std::size_t n = static_cast<std::size_t>(n_);
        Eval e;
        e.h = v[0];
        e.V = v[1];
        e.region = region_of_h(e.h);
        e.b = bump(e.h, eps_);
        const double p = bump_derivative(e.h, eps_);
        const double v2 = alpha_ * e.V;
        e.W = (1.0 - e.b) * v2 + e.b * e.h;
        e.grad.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double gh = v[2 + i];
            const double gv = alpha_ * v[2 + n + i];
            e.grad[i] = e.b * gh + (1.0 - e.b) * gv + (e.h - v2) * p * gh;
        }
        return e;
    }

    [[nodiscard]] double value(std::span<const double> x) const { return evaluate(x).W; }
    [[nodiscard]] std::vector<double> grad(std::span<const double> x) const { return evaluate(x).grad; }

private:
    Expr h_;
    Expr V_;
    Expr V2_;
    double eps_ = 0.5;
    double alpha_ = 1.0;
    int n_ = 0;
    std::array<Expr, 3> W_;
    std::array<std::vector<Expr>, 3> grad_;
    Tape tape_;
};

inline PatchedCLBF build_patched(const Expr& h, const Expr& V, double eps, double alpha, int n) {
    return PatchedCLBF(h, V, eps, alpha, n);
}

}  // namespace clbf
