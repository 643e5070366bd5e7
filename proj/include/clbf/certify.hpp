// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Certification of a barrier/Lyapunov pair: the strict barrier condition on
// {h = 1}, the Lyapunov decrease condition on C away from a small origin ball
// (plus a local quadratic check inside it), and compatibility on the band
// {1 - eps <= h <= 1} in its multiplier form, with a bisection on eps.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "clbf/errors.hpp"
#include "clbf/expr.hpp"
#include "clbf/interval.hpp"
#include "clbf/queries.hpp"
#include "clbf/verifier.hpp"

namespace clbf {

/// Hessian of e at the origin.
inline Eigen::MatrixXd hessian_at_origin(const Expr& e, int n) {
    const std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
    Eigen::MatrixXd H(n, n);
    for (int i = 0; i < n; ++i) {
        const Expr di = differentiate(e, i);
        for (int j = 0; j < n; ++j) H(i, j) = eval_point(differentiate(di, j), zero);
    }
    return 0.5 * (H + H.transpose());
}

/// Jacobian of the drift at the origin.
inline Eigen::MatrixXd drift_jacobian(const VectorField& vf) {
    const std::vector<double> zero(static_cast<std::size_t>(vf.n), 0.0);
    Eigen::MatrixXd A(vf.n, vf.n);
    for (int i = 0; i < vf.n; ++i) {
        for (int j = 0; j < vf.n; ++j) A(i, j) = eval_point(differentiate(vf.f[static_cast<std::size_t>(i)], j), zero);
    }
    return A;
}

inline Eigen::MatrixXd input_matrix_at_origin(const VectorField& vf) {
    const std::vector<double> zero(static_cast<std::size_t>(vf.n), 0.0);
    Eigen::MatrixXd G(vf.n, vf.m);
    for (int i = 0; i < vf.n; ++i) {
        for (int j = 0; j < vf.m; ++j) {
            G(i, j) = eval_point(vf.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], zero);
        }
    }
    return G;
}

struct CLFCandidate {
    Expr V;
    /// Quadratic-form matrix when V = x^T P x.
    std::optional<Eigen::MatrixXd> P;

    /// Throws SpecError unless V(0) = 0, V > 0 at 1000 sampled nonzero points
    /// of the box and P (when given) is symmetric positive definite.
    void validate(const IntervalBox& box) const {
        const std::size_t n = box.size();
        if (max_variable_index(V) >= static_cast<int>(n)) throw SpecError("V exceeds the state dimension");
        const std::vector<double> zero(n, 0.0);
        if (std::abs(eval_point(V, zero)) > 1e-12) throw SpecError("V(0) must be 0");
        if (P) {
            if (P->rows() != static_cast<Eigen::Index>(n) || P->cols() != static_cast<Eigen::Index>(n)) {
                throw SpecError("P has the wrong shape");
            }
            if (!P->isApprox(P->transpose(), 1e-12)) throw SpecError("P is not symmetric");
            if (Eigen::LLT<Eigen::MatrixXd>(*P).info() != Eigen::Success) throw SpecError("P is not positive definite");
        }
        std::mt19937_64 rng(7);
        std::vector<double> x(n);
        for (int k = 0; k < 1000; ++k) {
            bool nonzero = false;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = std::uniform_real_distribution<double>(box[i].lo, box[i].hi)(rng);
                nonzero = nonzero || x[i] != 0.0;
            }
            if (nonzero && !(eval_point(V, x) > 0.0)) throw SpecError("V is not positive at a sampled nonzero point");
        }
    }
};

inline Verdict verify_strict_cbf(const Expr& h, const VectorField& vf, const IntervalBox& box,
                                 const VerifierSettings& s = {}) {
    return check(strict_cbf_query(h, vf, box, s), s.check);
}

/// Local feedback u = -gain G^T P x making A - gain G G^T P decrease V = x^T P x
/// at the linearization, where P = Hessian(V)(0) / 2.
struct LocalCheck {
    bool ok = false;
    double gain = 0.0;
    /// Largest eigenvalue of A_cl^T P + P A_cl at the chosen gain.
    double max_eig = 0.0;
    double margin = 1e-6;
};

inline LocalCheck local_origin_check(const Expr& V, const VectorField& vf, double margin = 1e-6) {
    const int n = vf.n;
    const Eigen::MatrixXd P = 0.5 * hessian_at_origin(V, n);
    const Eigen::MatrixXd A = drift_jacobian(vf);
    const Eigen::MatrixXd G = input_matrix_at_origin(vf);
    LocalCheck best;
    best.margin = margin;
    best.max_eig = detail::kInf;
    if (Eigen::LLT<Eigen::MatrixXd>(P).info() != Eigen::Success) return best;
    for (int k = -4; k <= 12; ++k) {
        const double gamma = std::ldexp(1.0, k);
        const Eigen::MatrixXd Acl = A - gamma * G * G.transpose() * P;
        const Eigen::MatrixXd M = Acl.transpose() * P + P * Acl;
        const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (M + M.transpose())).eigenvalues().maxCoeff();
        if (top < best.max_eig) {
            best.max_eig = top;
            best.gain = gamma;
        }
        if (top < -margin) {
            best.ok = true;
            best.max_eig = top;
            best.gain = gamma;
            return best;
        }
    }
    return best;
}

struct ClfResult {
    Verdict verdict;
    LocalCheck local;
};

/// Lyapunov decrease on {h <= 1, |x| >= origin_radius} where L_g V = 0, plus
/// the local check inside the ball. Throws LocalCheckFailed when no local gain
/// works.
inline ClfResult verify_clf_on_C(const Expr& V, const Expr& h, const VectorField& vf, const IntervalBox& box,
                                 double origin_radius, const VerifierSettings& s = {}) {
    if (!(origin_radius > 0.0)) throw std::invalid_argument("verify_clf_on_C: origin_radius must be positive");
    const LocalCheck local = local_origin_check(V, vf);
    if (!local.ok) {
        throw LocalCheckFailed("no local feedback gain makes V decrease at the linearization (max eigenvalue " +
                               std::to_string(local.max_eig) + ")");
    }
    return {check(clf_query(V, h, vf, box, origin_radius, s), s.check), local};
}

inline Verdict verify_compatibility_band(const Expr& V, const Expr& h, const VectorField& vf, const IntervalBox& box,
                                         double eps, const VerifierSettings& s = {}) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("verify_compatibility_band: eps must lie in (0, 1)");
    return check(band_query(V, h, vf, box, eps, s), s.check);
}

struct BandProbe {
    double epsilon = 0.0;
    /// "verified", "counterexample" or "exhausted".
    std::string outcome;
    double seconds = 0.0;
};

struct BandResult {
    bool success = false;
    double epsilon = 0.0;
    bool cap_active = false;
    std::optional<VerdictVerified> verdict;
    std::vector<BandProbe> probes;
};

/// Largest band width in [tol, cap] that verifies, to resolution tol. A probe
/// that runs out of budget counts as a failure, except at eps = tol where
/// ResourceExhausted propagates.
inline BandResult bisect_band(const Expr& V, const Expr& h, const VectorField& vf, const IntervalBox& box,
                              double eps_cap = 0.5, double tol = 1e-3, const VerifierSettings& s = {}) {
    if (!(eps_cap > 0.0 && eps_cap < 1.0)) throw std::invalid_argument("bisect_band: eps_cap must lie in (0, 1)");
    if (!(tol > 0.0)) throw std::invalid_argument("bisect_band: tol must be positive");
    BandResult res;
    auto probe = [&](double eps, bool rethrow) -> std::optional<VerdictVerified> {
        BandProbe p{eps, "", 0.0};
        const auto start = std::chrono::steady_clock::now();
        std::optional<VerdictVerified> out;
        try {
            const Verdict v = verify_compatibility_band(V, h, vf, box, eps, s);
            if (const auto* ok = std::get_if<VerdictVerified>(&v)) {
                out = *ok;
                p.outcome = "verified";
            } else {
                p.outcome = "counterexample";
            }
        } catch (const ResourceExhausted&) {
            p.outcome = "exhausted";
            p.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            res.probes.push_back(p);
            if (rethrow) throw;
            return std::nullopt;
        }
        p.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.probes.push_back(p);
        return out;
    };
    if (auto v = probe(eps_cap, false)) {
        res.success = true;
        res.epsilon = eps_cap;
        res.cap_active = true;
        res.verdict = std::move(v);
        return res;
    }
    const double floor_eps = std::min(tol, eps_cap);
    auto lo_verdict = probe(floor_eps, true);
    if (!lo_verdict) return res;
    double lo = floor_eps;
    double hi = eps_cap;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (auto v = probe(mid, false)) {
            lo = mid;
            lo_verdict = std::move(v);
        } else {
            hi = mid;
        }
    }
    res.success = true;
    res.epsilon = lo;
    res.verdict = std::move(lo_verdict);
    return res;
}

struct CompatibilityCertificate {
    double epsilon_band = 0.0;
    bool cap_active = false;
    VerdictVerified cbf;
    VerdictVerified clf;
    VerdictVerified band;
    LocalCheck local;
    double origin_radius = 0.1;
    double delta = 1e-4;
};

struct CertifyOptions {
    double origin_radius = 0.1;
    double eps_cap = 0.5;
    double eps_tol = 1e-3;
    VerifierSettings verifier;
};

/// Outcome of the three certification steps. On failure, `stage` names the
/// step and `counterexample` holds its witness when there is one.
struct CertifyOutcome {
    std::optional<CompatibilityCertificate> certificate;
    std::string stage;
    std::optional<VerdictCounterexample> counterexample;
    std::vector<BandProbe> band_probes;
};

inline CertifyOutcome certify_pair(const Expr& h, const Expr& V, const VectorField& vf, const IntervalBox& box,
                                   const CertifyOptions& opt) {
    CertifyOutcome out;
    CompatibilityCertificate cert;
    cert.origin_radius = opt.origin_radius;
    cert.delta = opt.verifier.delta;
    const Verdict cbf = verify_strict_cbf(h, vf, box, opt.verifier);
    if (!is_verified(cbf)) {
        out.stage = "strict_cbf";
        out.counterexample = std::get<VerdictCounterexample>(cbf);
        return out;
    }
    cert.cbf = std::get<VerdictVerified>(cbf);
    const ClfResult clf = verify_clf_on_C(V, h, vf, box, opt.origin_radius, opt.verifier);
    if (!is_verified(clf.verdict)) {
        out.stage = "clf";
        out.counterexample = std::get<VerdictCounterexample>(clf.verdict);
        return out;
    }
    cert.clf = std::get<VerdictVerified>(clf.verdict);
    cert.local = clf.local;
    BandResult band = bisect_band(V, h, vf, box, opt.eps_cap, opt.eps_tol, opt.verifier);
    out.band_probes = band.probes;
    if (!band.success) {
        out.stage = "compatibility_band";
        return out;
    }
    cert.epsilon_band = band.epsilon;
    cert.cap_active = band.cap_active;
    cert.band = *band.verdict;
    out.certificate = cert;
    return out;
}

/// First diagonal quadratic x^T diag(d) x, d drawn from `grid` in each
/// coordinate (lexicographic order), that certifies with h. Nullopt if none.
inline std::optional<std::pair<CLFCandidate, CompatibilityCertificate>> search_diagonal_clf(
    const Expr& h, const VectorField& vf, const IntervalBox& box, const std::vector<double>& grid,
    const CertifyOptions& opt) {
    const int n = vf.n;
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    for (;;) {
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
        Expr V(0.0);
        for (int i = 0; i < n; ++i) {
            const double d = grid[idx[static_cast<std::size_t>(i)]];
            P(i, i) = d;
            V += Expr(d) * pow(var(i), 2);
        }
        try {
            CertifyOutcome o = certify_pair(h, V, vf, box, opt);
            if (o.certificate) return std::make_pair(CLFCandidate{V, P}, *o.certificate);
        } catch (const LocalCheckFailed&) {
        } catch (const ResourceExhausted&) {
        }
        std::size_t k = static_cast<std::size_t>(n);
        while (k > 0) {
            --k;
            if (++idx[k] < grid.size()) break;
            idx[k] = 0;
            if (k == 0) return std::nullopt;
        }
    }
}

}  // namespace clbf
