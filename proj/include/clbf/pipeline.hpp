// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end commands behind the command-line tool: synthesize a certificate
// from a problem file, replay one, simulate the closed loop, export grids and
// run the benchmark suite. Each returns a process exit code.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "clbf/barrier.hpp"
#include "clbf/certificate.hpp"
#include "clbf/certify.hpp"
#include "clbf/control.hpp"
#include "clbf/patch.hpp"
#include "clbf/problem.hpp"

namespace clbf {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitFailure = 2, kExitExhausted = 3 };

/// Command-line parameter overrides, applied before validation.
struct Overrides {
    std::optional<double> delta;
    std::optional<double> tau;
    std::optional<int> k_max;
    std::optional<double> theta;
    std::optional<double> cut_margin;
    std::optional<double> eps_cap;
    std::optional<double> origin_radius;
    std::optional<std::uint64_t> budget;

    void apply(ProblemSpec& p) const {
        if (delta) p.params.delta = *delta;
        if (tau) p.params.tau = *tau;
        if (k_max) p.params.k_max = *k_max;
        if (theta) p.params.theta = *theta;
        if (cut_margin) p.params.cut_margin = *cut_margin;
        if (eps_cap) p.params.eps_cap = *eps_cap;
        if (origin_radius) p.params.origin_radius = *origin_radius;
        if (budget) p.params.budget = *budget;
    }
};

inline VerifierSettings verifier_settings(const Parameters& p, const CheckOptions& check) {
    return {p.delta, p.min_box_width, p.budget, check};
}

inline const std::vector<std::string>& declared_divergences() {
    static const std::vector<std::string> d{
        "origin ball |x| < origin_radius is excluded from the Lyapunov query and covered by a local check: "
        "A_cl = A - gain G G^T P must satisfy A_cl^T P + P A_cl < -margin I, P = Hessian(V)(0)/2",
        "band compatibility uses multipliers (lambda, 1 - lambda) with lambda in [0, 1]",
        "Sontag feedback uses the standard |B|^4 form; inside |x| < 1e-3 the local linear feedback is used",
        "alpha = (1 - eps) / U where U is a verified upper bound of V on {h <= 1} (1% gap)"};
    return d;
}

namespace detail {

inline std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& M) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(M.rows()));
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(M(i, j));
    }
    return rows;
}

inline std::vector<CertRegion> region_records(const PatchedCLBF& W) {
    const std::string lo = format_double(1.0 - W.epsilon());
    const std::vector<std::pair<Region, std::string>> parts{
        {Region::Inside, "h <= " + lo}, {Region::Band, lo + " < h < 1"}, {Region::Outside, "h >= 1"}};
    std::vector<CertRegion> out;
    for (const auto& [r, cond] : parts) {
        CertRegion rec{region_name(r), cond, to_string(W.W(r)), {}};
        for (const auto& g : W.grad_W(r)) rec.grad.push_back(to_string(g));
        out.push_back(std::move(rec));
    }
    return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

struct SynthesisResult {
    Certificate certificate;
    int exit_code = kExitFailure;
};

/// Runs softmax construction, refinement, Lyapunov and band certification,
/// the alpha bound and the patch. On failure the certificate carries the
/// stage and the objects built so far.
inline SynthesisResult synthesize(const ProblemSpec& problem, const CheckOptions& check, std::ostream& log) {
    const auto t_start = std::chrono::steady_clock::now();
    SynthesisResult out;
    Certificate& c = out.certificate;
    c.created = utc_timestamp();
    c.problem = problem;
    c.problem_digest = problem.digest();
    c.divergences = declared_divergences();
    const Parameters& P = problem.params;
    const VerifierSettings vs = verifier_settings(P, check);
    std::string stage = "ingest";
    auto fail = [&](const std::string& kind, const std::string& message, int code,
                    const std::optional<VerdictCounterexample>& ce = std::nullopt) {
        CertFailure f{stage, kind, message, {}, std::nullopt};
        if (ce) {
            f.witness = ce->point;
            f.goal_value = ce->goal_value;
        }
        c.failure = std::move(f);
        c.status = "failed";
        out.exit_code = code;
        log << "failed at " << stage << " (" << kind << "): " << message << '\n';
    };
    try {
        const VectorField vf = problem.field();
        const ConstraintSet cs = problem.constraint_set();
        const IntervalBox box = cs.domain;

        stage = "barrier_refinement";
        RefineConfig rc;
        rc.k_max = P.k_max;
        rc.theta = P.theta;
        rc.eps_cut = P.cut_margin;
        rc.r_seed = P.r_seed;
        rc.verifier = vs;
        const RefineResult rr = refine(build_softmax(cs, P.tau), vf, rc);
        CertBarrier cb;
        cb.tau = P.tau;
        cb.constraints = problem.constraints;
        cb.cuts = rr.candidate.cuts;
        cb.h_sm = to_string(rr.candidate.h_sm);
        if (rr.verified) cb.verdict = cert_verdict(*rr.verified);
        c.barrier = cb;
        json secs = json::array();
        for (const auto& r : rr.log) {
            c.refinement_log.push_back({r.iteration, r.verdict, r.witness, r.goal_value, r.cut, r.h_after, r.boxes});
            secs.push_back(r.seconds);
        }
        c.timing["refinement"] = secs;
        log << "barrier: " << (rr.success ? "verified" : "not verified") << " with " << rr.candidate.cuts.size()
            << " cuts\n";
        if (!rr.success) {
            fail("counterexample", "strict barrier condition still fails after k_max cuts", kExitFailure,
                 rr.last_counterexample);
            return out;
        }
        const Expr h = rr.candidate.h_sm;

        stage = "clf";
        auto t0 = std::chrono::steady_clock::now();
        CertifyOptions co{P.origin_radius, P.eps_cap, P.eps_tol, vs};
        Expr V;
        CompatibilityCertificate cc;
        std::vector<BandProbe> probes;
        CertClf clf;
        if (problem.auto_clf()) {
            clf.source = "grid";
            auto found = search_diagonal_clf(h, vf, box, problem.clf_grid, co);
            if (!found) {
                fail("not_found", "no diagonal quadratic on the grid certifies", kExitFailure);
                return out;
            }
            V = found->first.V;
            cc = found->second;
        } else {
            clf.source = "problem";
            V = problem.clf();
            CLFCandidate{V, std::nullopt}.validate(box);
            const ClfResult r = verify_clf_on_C(V, h, vf, box, P.origin_radius, vs);
            if (const auto* ce = std::get_if<VerdictCounterexample>(&r.verdict)) {
                fail("counterexample", "Lyapunov decrease fails on the safe set", kExitFailure, *ce);
                return out;
            }
            cc.clf = std::get<VerdictVerified>(r.verdict);
            cc.local = r.local;
            c.timing["clf"] = detail::seconds_since(t0);

            stage = "compatibility_band";
            t0 = std::chrono::steady_clock::now();
            const BandResult band = bisect_band(V, h, vf, box, P.eps_cap, P.eps_tol, vs);
            probes = band.probes;
            json ps = json::array();
            for (const auto& p : probes) ps.push_back(p.seconds);
            c.timing["band_probes"] = ps;
            if (!band.success) {
                c.compatibility = CertBand{0.0, false, {}, {}};
                for (const auto& p : probes) c.compatibility->probes.push_back({p.epsilon, p.outcome});
                fail("counterexample", "compatibility fails even on the narrowest band", kExitFailure);
                return out;
            }
            cc.epsilon_band = band.epsilon;
            cc.cap_active = band.cap_active;
            cc.band = *band.verdict;
        }
        c.timing["certify"] = detail::seconds_since(t0);
        clf.V = to_string(V);
        clf.P = detail::to_rows(0.5 * hessian_at_origin(V, vf.n));
        clf.origin_radius = P.origin_radius;
        clf.verdict = cert_verdict(cc.clf);
        clf.local_gain = cc.local.gain;
        clf.local_max_eig = cc.local.max_eig;
        clf.local_margin = cc.local.margin;
        c.clf = clf;
        CertBand cband{cc.epsilon_band, cc.cap_active, cert_verdict(cc.band), {}};
        for (const auto& p : probes) cband.probes.push_back({p.epsilon, p.outcome});
        c.compatibility = cband;
        log << "clf: " << clf.V << " verified (local gain " << clf.local_gain << ")\n";
        log << "band: eps = " << cc.epsilon_band << (cc.cap_active ? " (cap)" : "") << '\n';

        stage = "patch";
        t0 = std::chrono::steady_clock::now();
        const AlphaBound ab = compute_alpha(V, h, box, cc.epsilon_band);
        const PatchedCLBF W(h, V, cc.epsilon_band, ab.alpha, vf.n);
        c.patch = CertPatch{cc.epsilon_band, ab.alpha, ab.upper, ab.lower, ab.boxes, detail::region_records(W)};
        c.timing["patch"] = detail::seconds_since(t0);
        log << "patch: alpha = " << ab.alpha << " (V <= " << ab.upper << " on C)\n";
        c.status = "certified";
        out.exit_code = kExitOk;
    } catch (const ResourceExhausted& e) {
        fail("resource_exhausted", e.what(), kExitExhausted);
    } catch (const ParseError& e) {
        fail("parse_error", e.what(), kExitUsage);
    } catch (const Error& e) {
        fail("error", e.what(), kExitFailure);
    }
    c.timing["total"] = detail::seconds_since(t_start);
    return out;
}

/// Replays a certificate: problem digest, barrier rebuild, the three queries
/// (digests and verdicts), the local check, alpha and the region formulas.
inline int verify_certificate(const Certificate& c, const CheckOptions& opts, std::ostream& log) {
    using detail::format_double;
    int code = kExitOk;
    auto report = [&](const std::string& what, bool ok, const std::string& detail = "") {
        log << (ok ? "  ok        " : "  MISMATCH  ") << what;
        if (!detail.empty()) log << ": " << detail;
        log << '\n';
        if (!ok && code == kExitOk) code = kExitFailure;
    };
    if (!c.certified() || !c.barrier || !c.clf || !c.compatibility || !c.patch) {
        report("status", false, "certificate records a failure or is incomplete");
        return kExitFailure;
    }
    try {
        const ProblemSpec& p = c.problem;
        report("problem digest", p.digest() == c.problem_digest);
        p.validate();
        const VectorField vf = p.field();
        const ConstraintSet cs = p.constraint_set();
        const IntervalBox box = cs.domain;
        const VerifierSettings vs = verifier_settings(p.params, opts);

        const CertBarrier& b = *c.barrier;
        report("tau", b.tau == p.params.tau, format_double(b.tau) + " vs problem " + format_double(p.params.tau));
        report("constraints", b.constraints == p.constraints);
        const BarrierCandidate cand = build_softmax(cs, b.tau, b.cuts);
        report("h_sm rebuild", to_string(cand.h_sm) == b.h_sm);
        auto replay = [&](const std::string& name, const Query& q, const CertVerdict& stored) {
            const bool same = q.digest() == stored.digest;
            report(name + " digest", same);
            const Verdict v = check(q, vs.check);
            if (const auto* ce = std::get_if<VerdictCounterexample>(&v)) {
                std::ostringstream os;
                os << "counterexample at";
                for (double x : ce->point) os << ' ' << x;
                report(name + " verdict", false, os.str());
            } else {
                report(name + " verdict", true, std::to_string(std::get<VerdictVerified>(v).boxes) + " boxes");
            }
        };
        replay("strict barrier", strict_cbf_query(cand.h_sm, vf, box, vs), b.verdict.value_or(CertVerdict{}));

        const CertClf& cl = *c.clf;
        const Expr V = parse_expr(cl.V, p.n);
        report("origin radius", cl.origin_radius == p.params.origin_radius);
        const LocalCheck local = local_origin_check(V, vf, cl.local_margin);
        report("local check", local.ok && local.gain == cl.local_gain,
               "gain " + format_double(local.gain) + ", max eigenvalue " + format_double(local.max_eig));
        replay("lyapunov", clf_query(V, cand.h_sm, vf, box, cl.origin_radius, vs), cl.verdict);

        const CertBand& band = *c.compatibility;
        report("band width", band.epsilon > 0.0 && band.epsilon <= p.params.eps_cap, format_double(band.epsilon));
        if (band.epsilon > 0.0 && band.epsilon < 1.0) {
            replay("band", band_query(V, cand.h_sm, vf, box, band.epsilon, vs), band.verdict);
        }

        const CertPatch& pt = *c.patch;
        report("patch epsilon", pt.epsilon == band.epsilon);
        const AlphaBound ab = compute_alpha(V, cand.h_sm, box, pt.epsilon);
        report("alpha", std::abs(ab.alpha - pt.alpha) <= 1e-12 * ab.alpha,
               format_double(ab.alpha) + " vs stored " + format_double(pt.alpha));
        const PatchedCLBF W(cand.h_sm, V, pt.epsilon, pt.alpha, p.n);
        report("region formulas", detail::region_records(W) == pt.regions);
    } catch (const ResourceExhausted& e) {
        log << "  EXHAUSTED " << e.what() << '\n';
        return code == kExitOk ? kExitExhausted : code;
    } catch (const std::exception& e) {
        report("replay", false, e.what());
    }
    return code;
}

/// Rebuilds W from a certified certificate.
inline PatchedCLBF patched_from(const Certificate& c) {
    if (!c.certified() || !c.barrier || !c.clf || !c.patch) throw SpecError("certificate is not certified");
    const ProblemSpec& p = c.problem;
    const BarrierCandidate cand = build_softmax(p.constraint_set(), c.barrier->tau, c.barrier->cuts);
    return PatchedCLBF(cand.h_sm, parse_expr(c.clf->V, p.n), c.patch->epsilon, c.patch->alpha, p.n);
}

struct TrajectorySummary {
    std::vector<double> x0;
    std::string status;
    std::size_t steps = 0;
    double final_norm = 0.0;
    double max_h = 0.0;
    double max_W = 0.0;
    /// Largest one-step increase of W.
    double W_increase = 0.0;
};

struct SimulationReport {
    std::vector<TrajectorySummary> runs;
    int converged = 0;
    int unsafe = 0;
    double max_h = -detail::kInf;
    double max_W = -detail::kInf;
    double max_W_increase = -detail::kInf;

    /// No escape, blow-up or controller failure, and h stayed below 1 + 1e-6.
    [[nodiscard]] bool safe() const { return unsafe == 0 && (runs.empty() || max_h <= 1.0 + 1e-6); }
};

/// Uniform samples of the domain box with h <= 1 - margin.
inline std::vector<std::vector<double>> sample_initial_states(const PatchedCLBF& W, const IntervalBox& box, int count,
                                                              std::uint64_t seed, double margin) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> out;
    std::vector<double> x(box.size());
    std::uint64_t tries = 0;
    while (static_cast<int>(out.size()) < count) {
        if (++tries > 10'000'000) throw EmptySafeSet("no initial state found in {h <= 1 - margin}");
        for (std::size_t i = 0; i < box.size(); ++i) x[i] = std::uniform_real_distribution<double>(box[i].lo, box[i].hi)(rng);
        if (W.evaluate(x).h <= 1.0 - margin) out.push_back(x);
    }
    return out;
}

/// Simulates the Sontag closed loop from each state. When `dir` is non-empty,
/// trajectory k is written to dir/traj_<k>.dat.
inline SimulationReport simulate_batch(const PatchedCLBF& W, const VectorField& vf, double local_gain,
                                       const IntervalBox& box, const std::vector<std::vector<double>>& starts,
                                       const SimulationOptions& opt, unsigned threads = 1,
                                       const std::filesystem::path& dir = {}) {
    const SontagController ctrl(W, vf, local_gain);
    SimulationReport rep;
    rep.runs.resize(starts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < starts.size(); k = next++) {
            TrajectorySummary& s = rep.runs[k];
            s.x0 = starts[k];
            try {
                const Trajectory tr = simulate(ctrl, starts[k], box, opt);
                s.status = status_name(tr.status);
                s.steps = tr.size();
                double r = 0.0;
                for (double v : tr.x.back()) r += v * v;
                s.final_norm = std::sqrt(r);
                s.max_h = *std::max_element(tr.h.begin(), tr.h.end());
                s.max_W = *std::max_element(tr.W.begin(), tr.W.end());
                s.W_increase = -detail::kInf;
                for (std::size_t i = 1; i < tr.W.size(); ++i) s.W_increase = std::max(s.W_increase, tr.W[i] - tr.W[i - 1]);
                if (!dir.empty()) {
                    std::ostringstream name;
                    name << "traj_" << std::setw(3) << std::setfill('0') << k << ".dat";
                    std::ofstream os(dir / name.str());
                    write_trajectory(os, tr);
                }
            } catch (const ControlUndefined&) {
                s.status = "control_undefined";
            } catch (const NumericBlowup&) {
                s.status = "blowup";
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::max(1u, threads); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& s : rep.runs) {
        if (s.status == "converged") ++rep.converged;
        if (s.status == "escaped" || s.status == "control_undefined" || s.status == "blowup") {
            ++rep.unsafe;
            continue;
        }
        rep.max_h = std::max(rep.max_h, s.max_h);
        rep.max_W = std::max(rep.max_W, s.max_W);
        rep.max_W_increase = std::max(rep.max_W_increase, s.W_increase);
    }
    return rep;
}

inline json to_json(const SimulationReport& r, const SimulationOptions& opt, std::uint64_t seed) {
    auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json runs = json::array();
    for (const auto& s : r.runs) {
        runs.push_back({{"x0", s.x0},
                        {"status", s.status},
                        {"steps", s.steps},
                        {"final_norm", s.final_norm},
                        {"max_h", s.max_h},
                        {"max_W", s.max_W},
                        {"max_W_increase", finite(s.W_increase)}});
    }
    return {{"count", r.runs.size()},
            {"seed", seed},
            {"dt", opt.dt},
            {"T", opt.T},
            {"converged", r.converged},
            {"unsafe", r.unsafe},
            {"safe", r.safe()},
            {"max_h", finite(r.max_h)},
            {"max_W", finite(r.max_W)},
            {"max_W_increase", finite(r.max_W_increase)},
            {"trajectories", runs}};
}

/// Samples `count` starts in {h <= 1 - margin}, simulates them and writes
/// per-trajectory files plus summary.json to `dir`. Exit 0 iff all are safe.
inline int simulate_certificate(const Certificate& c, int count, std::uint64_t seed, const std::filesystem::path& dir,
                                unsigned threads, std::ostream& log, std::size_t record_every = 1) {
    const PatchedCLBF W = patched_from(c);
    const ProblemSpec& p = c.problem;
    const IntervalBox box = p.box();
    SimulationOptions opt;
    opt.dt = p.simulation.dt;
    opt.T = p.simulation.T;
    opt.record_every = record_every;
    std::filesystem::create_directories(dir);
    const auto starts = sample_initial_states(W, box, count, seed, p.simulation.margin);
    const SimulationReport rep = simulate_batch(W, p.field(), c.clf->local_gain, box, starts, opt, threads, dir);
    write_json_file((dir / "summary.json").string(), to_json(rep, opt, seed));
    log << "trajectories: " << rep.runs.size() << ", converged: " << rep.converged << ", unsafe: " << rep.unsafe;
    if (!rep.runs.empty()) log << ", max h: " << rep.max_h << ", max W: " << rep.max_W;
    log << '\n';
    return rep.safe() ? kExitOk : kExitFailure;
}

struct GridSummary {
    std::size_t rows = 0;
    std::size_t segments = 0;
    /// Fixed coordinate of the x3 slice (3-D only).
    std::optional<double> slice;
};

/// Segments of the 1-level set of h over a uniform r-by-r grid on the
/// rectangle [a0, b0] x [a1, b1]; `value(i, j)` is h at grid node (i, j).
template <class F>
std::vector<std::array<double, 4>> marching_squares(int r, double a0, double b0, double a1, double b1, F&& value) {
    std::vector<std::array<double, 4>> segs;
    const double dx = (b0 - a0) / (r - 1);
    const double dy = (b1 - a1) / (r - 1);
    for (int i = 0; i + 1 < r; ++i) {
        for (int j = 0; j + 1 < r; ++j) {
            const double x0 = a0 + i * dx, y0 = a1 + j * dy;
            // corners counter-clockwise: (i,j) (i+1,j) (i+1,j+1) (i,j+1)
            const std::array<double, 4> v{value(i, j) - 1.0, value(i + 1, j) - 1.0, value(i + 1, j + 1) - 1.0,
                                          value(i, j + 1) - 1.0};
            const std::array<std::array<double, 2>, 4> p{{{x0, y0}, {x0 + dx, y0}, {x0 + dx, y0 + dy}, {x0, y0 + dy}}};
            std::vector<std::array<double, 2>> hits;
            for (int e = 0; e < 4; ++e) {
                const int f = (e + 1) % 4;
                if ((v[e] <= 0.0) == (v[f] <= 0.0)) continue;
                const double t = v[e] / (v[e] - v[f]);
                hits.push_back({p[e][0] + t * (p[f][0] - p[e][0]), p[e][1] + t * (p[f][1] - p[e][1])});
            }
            for (std::size_t k = 0; k + 1 < hits.size(); k += 2) {
                segs.push_back({hits[k][0], hits[k][1], hits[k + 1][0], hits[k + 1][1]});
            }
        }
    }
    return segs;
}

/// Writes grid.dat (h_sm and W at r x r nodes) and levelset.dat (segments of
/// {h_sm = 1}). For n = 3 the grid is the slice x3 = 0 (clamped into the
/// domain) and slice.json describes it.
inline GridSummary export_grid(const Certificate& c, int resolution, const std::filesystem::path& dir) {
    const ProblemSpec& p = c.problem;
    if (p.n != 2 && p.n != 3) throw UnsupportedDimension("grid export supports 2-D and 3-D states only");
    if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");
    const PatchedCLBF W = patched_from(c);
    const IntervalBox box = p.box();
    std::filesystem::create_directories(dir);
    GridSummary s;
    std::vector<double> x(static_cast<std::size_t>(p.n), 0.0);
    if (p.n == 3) {
        s.slice = std::clamp(0.0, box[2].lo, box[2].hi);
        x[2] = *s.slice;
        write_json_file((dir / "slice.json").string(),
                        {{"axis", 3}, {"value", *s.slice}, {"resolution", resolution}, {"x1", {box[0].lo, box[0].hi}},
                         {"x2", {box[1].lo, box[1].hi}}});
    }
    const int r = resolution;
    std::vector<double> hv(static_cast<std::size_t>(r) * static_cast<std::size_t>(r));
    std::ofstream g(dir / "grid.dat");
    g.precision(12);
    g << "# x1 x2" << (p.n == 3 ? " x3" : "") << " h_sm W\n";
    for (int i = 0; i < r; ++i) {
        x[0] = box[0].lo + (box[0].hi - box[0].lo) * i / (r - 1);
        for (int j = 0; j < r; ++j) {
            x[1] = box[1].lo + (box[1].hi - box[1].lo) * j / (r - 1);
            const auto e = W.evaluate(x);
            hv[static_cast<std::size_t>(i) * static_cast<std::size_t>(r) + static_cast<std::size_t>(j)] = e.h;
            for (double v : x) g << v << ' ';
            g << e.h << ' ' << e.W << '\n';
            ++s.rows;
        }
    }
    const auto segs = marching_squares(r, box[0].lo, box[0].hi, box[1].lo, box[1].hi, [&](int i, int j) {
        return hv[static_cast<std::size_t>(i) * static_cast<std::size_t>(r) + static_cast<std::size_t>(j)];
    });
    std::ofstream l(dir / "levelset.dat");
    l.precision(12);
    l << "# segments of {h_sm = 1}: x1 x2 per endpoint, blank line between segments\n";
    for (const auto& sg : segs) l << sg[0] << ' ' << sg[1] << '\n' << sg[2] << ' ' << sg[3] << "\n\n";
    s.segments = segs.size();
    return s;
}

struct BenchRow {
    std::string name;
    std::string status;
    std::size_t cuts = 0;
    double epsilon = 0.0;
    double alpha = 0.0;
    double seconds = 0.0;
    int exit_code = kExitFailure;
};

/// Synthesizes every *.spec in `spec_dir` (sorted by name), writes
/// <name>.cert.json to `out_dir` and prints a table. Exit 0 iff all certify.
inline int run_bench(const std::filesystem::path& spec_dir, const std::filesystem::path& out_dir,
                     const Overrides& ov, const CheckOptions& check, std::ostream& log,
                     std::vector<BenchRow>* rows_out = nullptr) {
    std::vector<std::filesystem::path> specs;
    for (const auto& e : std::filesystem::directory_iterator(spec_dir)) {
        if (e.path().extension() == ".spec") specs.push_back(e.path());
    }
    std::sort(specs.begin(), specs.end());
    if (specs.empty()) throw ParseError("no .spec files in " + spec_dir.string());
    std::filesystem::create_directories(out_dir);
    std::vector<BenchRow> rows;
    std::ostringstream quiet;
    for (const auto& path : specs) {
        BenchRow row;
        row.name = path.stem().string();
        const auto t0 = std::chrono::steady_clock::now();
        ProblemSpec p = ProblemSpec::from_json(read_json_file(path.string()));
        ov.apply(p);
        p.validate();
        const SynthesisResult r = synthesize(p, check, quiet);
        row.seconds = detail::seconds_since(t0);
        row.exit_code = r.exit_code;
        const Certificate& c = r.certificate;
        row.status = c.certified() ? "certified" : "failed:" + c.failure->stage;
        if (c.barrier) row.cuts = c.barrier->cuts.size();
        if (c.patch) {
            row.epsilon = c.patch->epsilon;
            row.alpha = c.patch->alpha;
        }
        save_certificate((out_dir / (row.name + ".cert.json")).string(), c);
        rows.push_back(row);
    }
    log << std::left << std::setw(16) << "example" << std::setw(28) << "status" << std::setw(6) << "cuts"
        << std::setw(12) << "epsilon" << std::setw(14) << "alpha" << "seconds\n";
    int code = kExitOk;
    for (const auto& r : rows) {
        log << std::left << std::setw(16) << r.name << std::setw(28) << r.status << std::setw(6) << r.cuts
            << std::setw(12) << r.epsilon << std::setw(14) << r.alpha << std::fixed << std::setprecision(2)
            << r.seconds << std::defaultfloat << std::setprecision(6) << '\n';
        if (r.exit_code != kExitOk && code == kExitOk) code = r.exit_code;
    }
    log << (code == kExitOk ? "PASS" : "FAIL") << ": " << std::count_if(rows.begin(), rows.end(), [](const BenchRow& r) {
        return r.exit_code == kExitOk;
    }) << "/" << rows.size() << " certified\n";
    if (rows_out) *rows_out = rows;
    return code;
}

}  // namespace clbf
