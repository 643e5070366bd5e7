// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Softmax barrier h_sm = (1/tau) log sum_i exp(tau h_i) over a set of
// constraints {h_i <= 1}, and counterexample-guided refinement with half-space
// cuts placed just past each verifier witness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "clbf/errors.hpp"
#include "clbf/expr.hpp"
#include "clbf/interval.hpp"
#include "clbf/queries.hpp"
#include "clbf/verifier.hpp"

namespace clbf {

struct ConstraintSet {
    std::vector<Expr> h;
    IntervalBox domain;

    [[nodiscard]] int dim() const { return static_cast<int>(domain.size()); }

    /// Throws SpecError unless N >= 1, dimensions agree and max_i h_i(0) < 1.
    void validate() const {
        if (h.empty()) throw SpecError("constraint set is empty");
        if (domain.size() == 0) throw SpecError("constraint set has no domain");
        const std::vector<double> origin(domain.size(), 0.0);
        if (!domain.contains(origin)) throw SpecError("domain does not contain the origin");
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (max_variable_index(h[i]) >= dim()) throw SpecError("constraint " + std::to_string(i + 1) + " exceeds the state dimension");
            const double v = eval_point(h[i], origin);
            if (!(v < 1.0)) {
                throw SpecError("origin is not strictly inside constraint " + std::to_string(i + 1) +
                                " (h(0) = " + std::to_string(v) + ")");
            }
        }
    }
};

struct HalfSpaceCut {
    std::vector<double> normal;
    double offset = 0.0;
    /// Counterexample the cut was built from; empty for cuts read from a file.
    std::vector<double> witness;

    /// n^T x - b + 1.
    [[nodiscard]] Expr expr() const {
        Expr e(1.0 - offset);
        for (std::size_t i = 0; i < normal.size(); ++i) {
            if (normal[i] != 0.0) e = Expr(normal[i]) * var(static_cast<int>(i)) + e;
        }
        return e;
    }

    [[nodiscard]] double value(std::span<const double> x) const {
        double s = 1.0 - offset;
        for (std::size_t i = 0; i < normal.size(); ++i) s += normal[i] * x[i];
        return s;
    }

    bool operator==(const HalfSpaceCut&) const = default;
};

struct BarrierCandidate {
    ConstraintSet base;
    std::vector<HalfSpaceCut> cuts;
    double tau = 1.0;
    Expr h_sm;

    [[nodiscard]] std::vector<Expr> terms() const {
        std::vector<Expr> t = base.h;
        for (const auto& c : cuts) t.push_back(c.expr());
        return t;
    }

    [[nodiscard]] double h_max(std::span<const double> x) const {
        double m = -detail::kInf;
        for (const auto& e : base.h) m = std::max(m, eval_point(e, x));
        for (const auto& c : cuts) m = std::max(m, c.value(x));
        return m;
    }
};

inline BarrierCandidate build_softmax(const ConstraintSet& cs, double tau, std::vector<HalfSpaceCut> cuts = {}) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("build_softmax: tau must be positive");
    BarrierCandidate c{cs, std::move(cuts), tau, Expr()};
    c.h_sm = lse(tau, c.terms());
    return c;
}

namespace detail {

// Unit vector orthogonal to n: the least aligned coordinate axis, projected and
// normalized. For n >= 3 the seed rotates it within the complement.
inline std::vector<double> orthogonal_direction(const std::vector<double>& n, int r_seed) {
    const std::size_t d = n.size();
    auto orthonormalize = [&](std::vector<double> v, const std::vector<std::vector<double>>& against) {
        for (const auto& a : against) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += v[i] * a[i];
            for (std::size_t i = 0; i < d; ++i) v[i] -= dot * a[i];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return v;
    };
    // Axes ordered by |n_i|, smallest first (lowest index on ties).
    std::vector<std::size_t> axes(d);
    for (std::size_t i = 0; i < d; ++i) axes[i] = i;
    std::stable_sort(axes.begin(), axes.end(), [&](std::size_t a, std::size_t b) { return std::abs(n[a]) < std::abs(n[b]); });
    std::vector<double> e(d, 0.0);
    e[axes[0]] = 1.0;
    std::vector<double> r = orthonormalize(e, {n});
    if (d < 3 || r_seed == 0) return r;
    std::fill(e.begin(), e.end(), 0.0);
    e[axes[1]] = 1.0;
    const std::vector<double> s = orthonormalize(e, {n, r});
    const double phi = r_seed * std::numbers::pi / 4.0;
    for (std::size_t i = 0; i < d; ++i) r[i] = std::cos(phi) * r[i] + std::sin(phi) * s[i];
    return r;
}

}  // namespace detail

/// Cut through x* rotated by theta away from the barrier's normal there.
/// `flip` rotates towards -r instead of r.
inline HalfSpaceCut make_cut(std::span<const double> x_star, const BarrierCandidate& cand, double theta, double eps_cut,
                             int r_seed = 0, bool flip = false) {
    if (!(eps_cut > 0.0)) throw std::invalid_argument("make_cut: eps_cut must be positive");
    if (!(theta >= 0.0 && theta < std::numbers::pi / 2)) throw std::invalid_argument("make_cut: theta must lie in [0, pi/2)");
    const std::size_t d = x_star.size();
    std::vector<double> n(d);
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        n[i] = eval_point(differentiate(cand.h_sm, static_cast<int>(i)), x_star);
        norm += n[i] * n[i];
    }
    norm = std::sqrt(norm);
    if (!(norm > 1e-10)) throw DegenerateGradient("softmax barrier gradient vanishes at the counterexample");
    for (double& v : n) v /= norm;
    const std::vector<double> r = detail::orthogonal_direction(n, r_seed);
    const double sgn = flip ? -1.0 : 1.0;
    HalfSpaceCut cut;
    cut.normal.resize(d);
    double nn = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        cut.normal[i] = n[i] * std::cos(theta) + sgn * r[i] * std::sin(theta);
        nn += cut.normal[i] * cut.normal[i];
    }
    nn = std::sqrt(nn);
    for (double& v : cut.normal) v /= nn;
    double proj = 0.0;
    for (std::size_t i = 0; i < d; ++i) proj += cut.normal[i] * x_star[i];
    cut.offset = proj - eps_cut;
    cut.witness.assign(x_star.begin(), x_star.end());
    return cut;
}

struct RefineConfig {
    int k_max = 25;
    double theta = 0.05;
    double eps_cut = 0.01;
    int r_seed = 0;
    VerifierSettings verifier;
};

struct RefinementRecord {
    int iteration = 0;
    /// "verified" or "counterexample".
    std::string verdict;
    std::vector<double> witness;
    double goal_value = 0.0;
    std::optional<HalfSpaceCut> cut;
    /// h_sm of the rebuilt barrier at the witness; above 1 when the cut excludes it.
    double h_after = 0.0;
    std::uint64_t boxes = 0;
    double seconds = 0.0;
};

struct RefineResult {
    bool success = false;
    BarrierCandidate candidate;
    std::vector<RefinementRecord> log;
    /// Verdict on the final candidate.
    std::optional<VerdictVerified> verified;
    std::optional<VerdictCounterexample> last_counterexample;
};

/// Verifies the strict barrier condition, adding one cut per counterexample,
/// for at most k_max cuts.
inline RefineResult refine(BarrierCandidate cand, const VectorField& vf, const RefineConfig& cfg) {
    if (cfg.k_max < 0) throw std::invalid_argument("refine: k_max must be non-negative");
    RefineResult res;
    std::optional<std::vector<double>> prev_witness;
    bool prev_flip = false;
    for (int k = 0;; ++k) {
        const Query q = strict_cbf_query(cand.h_sm, vf, cand.base.domain, cfg.verifier);
        const Verdict v = check(q, cfg.verifier.check);
        RefinementRecord rec;
        rec.iteration = k;
        if (const auto* ok = std::get_if<VerdictVerified>(&v)) {
            rec.verdict = "verified";
            rec.boxes = ok->boxes;
            rec.seconds = ok->seconds;
            res.log.push_back(std::move(rec));
            res.success = true;
            res.verified = *ok;
            res.candidate = std::move(cand);
            return res;
        }
        const auto& ce = std::get<VerdictCounterexample>(v);
        rec.verdict = "counterexample";
        rec.witness = ce.point;
        rec.goal_value = ce.goal_value;
        rec.boxes = ce.boxes;
        rec.seconds = ce.seconds;
        res.last_counterexample = ce;
        if (k >= cfg.k_max) {
            res.log.push_back(std::move(rec));
            res.candidate = std::move(cand);
            return res;
        }
        bool flip = false;
        if (prev_witness) {
            double dist = 0.0;
            for (std::size_t i = 0; i < ce.point.size(); ++i) dist += std::pow(ce.point[i] - (*prev_witness)[i], 2);
            if (std::sqrt(dist) < 0.1) flip = !prev_flip;
        }
        HalfSpaceCut cut = make_cut(ce.point, cand, cfg.theta, cfg.eps_cut, cfg.r_seed, flip);
        prev_witness = ce.point;
        prev_flip = flip;
        std::vector<HalfSpaceCut> cuts = cand.cuts;
        cuts.push_back(cut);
        cand = build_softmax(cand.base, cand.tau, std::move(cuts));
        rec.cut = std::move(cut);
        rec.h_after = eval_point(cand.h_sm, ce.point);
        res.log.push_back(std::move(rec));
    }
}

}  // namespace clbf
