// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Verifier queries for the three certification conditions.
//
//   strict CBF:     (h = 1, L_g h = 0)             ==> L_f h < 0
//   CLF on C:       (L_g V = 0, h <= 1, |x| >= r)  ==> L_f V < 0
//   band compat.:   (1 - eps <= h <= 1, l in [0,1],
//                    l L_g V + (1 - l) L_g h = 0)  ==> l L_f V + (1 - l) L_f h < 0
//
// The band query carries the simplex multiplier as one extra box coordinate
// l = lambda_1 (lambda_2 = 1 - l).

#include <cstdint>

#include "clbf/expr.hpp"
#include "clbf/interval.hpp"
#include "clbf/tape.hpp"
#include "clbf/verifier.hpp"

namespace clbf {

struct VerifierSettings {
    double delta = 1e-4;
    double min_box_width = 1e-5;
    std::uint64_t budget = 5'000'000;
    CheckOptions check;
};

namespace detail {

inline Query base_query(const IntervalBox& box, const VerifierSettings& s) {
    Query q;
    q.box = box;
    q.delta = s.delta;
    q.min_box_width = s.min_box_width;
    q.budget = s.budget;
    return q;
}

}  // namespace detail

inline Query strict_cbf_query(const Expr& h, const VectorField& vf, const IntervalBox& box,
                              const VerifierSettings& s) {
    const auto ld = lie_derivatives(h, vf);
    Query q = detail::base_query(box, s);
    q.intervals.push_back({h, 1.0, 1.0});
    q.equalities = ld.lg;
    q.goal = ld.lf;
    return q;
}

inline Query clf_query(const Expr& V, const Expr& h, const VectorField& vf, const IntervalBox& box,
                       double origin_radius, const VerifierSettings& s) {
    const auto ld = lie_derivatives(V, vf);
    Query q = detail::base_query(box, s);
    q.equalities = ld.lg;
    // h <= 1 and |x|^2 >= r^2 become compact ranges using enclosures over the box.
    const double h_lo = eval_interval(h, box).lo;
    q.intervals.push_back({h, std::min(h_lo, 1.0), 1.0});
    Expr norm2(0.0);
    for (int i = 0; i < vf.n; ++i) norm2 += pow(var(i), 2);
    const double n_hi = eval_interval(norm2, box).hi;
    q.intervals.push_back({norm2, origin_radius * origin_radius, std::max(n_hi, origin_radius * origin_radius)});
    q.goal = ld.lf;
    return q;
}

inline Query band_query(const Expr& V, const Expr& h, const VectorField& vf, const IntervalBox& box, double eps,
                        const VerifierSettings& s) {
    const auto lv = lie_derivatives(V, vf);
    const auto lh = lie_derivatives(h, vf);
    const Expr l1 = var(vf.n);
    const Expr l2 = Expr(1.0) - l1;
    std::vector<Interval> dims(box.dims().begin(), box.dims().end());
    dims.emplace_back(0.0, 1.0);
    Query q = detail::base_query(IntervalBox(std::move(dims)), s);
    q.intervals.push_back({h, 1.0 - eps, 1.0});
    for (int j = 0; j < vf.m; ++j) {
        q.equalities.push_back(l1 * lv.lg[static_cast<std::size_t>(j)] + l2 * lh.lg[static_cast<std::size_t>(j)]);
    }
    q.goal = l1 * lv.lf + l2 * lh.lf;
    return q;
}

}  // namespace clbf
