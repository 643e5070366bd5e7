// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and a
// summary. Exit status is 0 when every failing criterion is on the
// known-shortfall list below, 1 otherwise.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "clbf/lp.hpp"
#include "clbf/pipeline.hpp"
#include "farkas_oracle.hpp"
#include "query_fuzz.hpp"
#include "support.hpp"

namespace {

using namespace clbf;
namespace fs = std::filesystem;

// Criteria that fail for reasons recorded in the project's decision log.
const std::set<int> kKnownShortfalls{9};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 6) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Example {
    std::string file;
    Certificate cert;
    int code = kExitFailure;
    double seconds = 0.0;
};

Example run_example(const std::string& file) {
    Example e;
    e.file = file;
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream quiet;
    const SynthesisResult r = synthesize(load_problem((fs::path(CLBF_BENCHMARK_DIR) / (file + ".spec")).string()), {}, quiet);
    e.seconds = elapsed(t0);
    e.cert = r.certificate;
    e.code = r.exit_code;
    return e;
}

double max_query_seconds(const Certificate& c) {
    double m = 0.0;
    for (const char* key : {"refinement", "band_probes"}) {
        if (!c.timing.contains(key)) continue;
        for (const auto& v : c.timing.at(key)) m = std::max(m, v.get<double>());
    }
    if (c.timing.contains("clf")) m = std::max(m, c.timing.at("clf").get<double>());
    return m;
}

bool complete(const Example& e) {
    const Certificate& c = e.cert;
    return e.code == kExitOk && c.certified() && c.barrier && c.barrier->verdict && c.clf && c.compatibility &&
           c.patch && c.compatibility->epsilon > 0.0 && c.compatibility->epsilon <= 0.5;
}

Outcome criterion1(const Example& e) {
    const double q = max_query_seconds(e.cert);
    const bool ok = complete(e) && e.cert.barrier->cuts.empty() && q <= 60.0;
    std::string d = "status " + e.cert.status;
    if (e.cert.barrier) d += ", cuts " + std::to_string(e.cert.barrier->cuts.size());
    if (e.cert.compatibility) d += ", epsilon " + fmt(e.cert.compatibility->epsilon);
    if (e.cert.patch) d += ", alpha " + fmt(e.cert.patch->alpha);
    return {ok, d + ", slowest query " + fmt(q, 3) + " s"};
}

Outcome criterion2(const Example& e) {
    const Certificate& c = e.cert;
    const bool direct_fails = !c.refinement_log.empty() && c.refinement_log.front().verdict == "counterexample";
    const std::size_t cuts = c.barrier ? c.barrier->cuts.size() : 0;
    const bool ok = direct_fails && complete(e) && cuts <= 25 && c.clf->V == "x1^2 + x2^2" && e.seconds <= 600.0;
    return {ok, std::string("direct check ") + (direct_fails ? "refuted" : "not refuted") + ", cuts " +
                    std::to_string(cuts) + ", status " + c.status + ", total " + fmt(e.seconds, 3) + " s"};
}

Outcome criterion3(const Example& linear, const Example& power) {
    const bool ok = complete(linear) && complete(power) && power.seconds <= 1800.0;
    return {ok, "linear " + linear.cert.status + " in " + fmt(linear.seconds, 3) + " s, power converter " +
                    power.cert.status + " in " + fmt(power.seconds, 3) + " s"};
}

std::vector<double> random_point(const IntervalBox& box, std::mt19937_64& rng) {
    std::vector<double> x(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) x[i] = std::uniform_real_distribution<double>(box[i].lo, box[i].hi)(rng);
    return x;
}

BarrierCandidate candidate(const Certificate& c) {
    return build_softmax(c.problem.constraint_set(), c.barrier->tau, c.barrier->cuts);
}

Outcome criterion4(const std::vector<Example>& all) {
    std::mt19937_64 rng(4);
    std::size_t failures = 0, points = 0;
    double worst = -1.0;
    for (const auto& e : all) {
        if (!e.cert.barrier) return {false, e.file + " has no barrier"};
        const BarrierCandidate cand = candidate(e.cert);
        const auto terms = cand.terms();
        const double tau = cand.tau;
        const double gap = std::log(static_cast<double>(terms.size())) / tau;
        const IntervalBox box = e.cert.problem.box();
        for (int k = 0; k < 10000; ++k) {
            const auto x = random_point(box, rng);
            std::vector<double> v;
            for (const auto& t : terms) v.push_back(eval_point(t, x));
            const double hmax = *std::max_element(v.begin(), v.end());
            const double hsm = eval_point(cand.h_sm, x);
            double s = 0.0;
            for (double hi : v) s += std::exp(tau * (hi - hmax));
            const double oracle = hmax + std::log(s) / tau;
            const double slack = std::max(hmax - hsm, hsm - hmax - gap);
            worst = std::max(worst, slack);
            if (slack > 1e-9 || std::abs(hsm - oracle) > 1e-9 * (1.0 + std::abs(oracle))) ++failures;
            ++points;
        }
    }
    return {failures == 0, std::to_string(points) + " points, " + std::to_string(failures) +
                               " failures, largest bound excess " + fmt(worst, 3)};
}

Outcome criterion5(const std::vector<Example>& all) {
    std::size_t mismatches = 0, checked = 0;
    std::mt19937_64 rng(5);
    for (const auto& e : all) {
        if (!e.cert.certified()) return {false, e.file + " is not certified"};
        const PatchedCLBF W = patched_from(e.cert);
        const IntervalBox box = e.cert.problem.box();
        auto check_point = [&](const std::vector<double>& x) {
            const auto v = W.evaluate(x);
            if (std::abs(v.h - 1.0) <= 1e-6) return;
            ++checked;
            if ((v.W > 1.0) != (v.h > 1.0)) ++mismatches;
        };
        if (box.size() == 2) {
            for (int i = 0; i < 400; ++i) {
                for (int j = 0; j < 400; ++j) {
                    check_point({box[0].lo + (box[0].hi - box[0].lo) * i / 399.0,
                                 box[1].lo + (box[1].hi - box[1].lo) * j / 399.0});
                }
            }
        } else {
            for (int k = 0; k < 100000; ++k) check_point(random_point(box, rng));
        }
    }
    return {mismatches == 0, std::to_string(checked) + " points, " + std::to_string(mismatches) + " mismatches"};
}

Outcome criterion6() {
    std::mt19937_64 rng(6);
    int mismatches = 0, infeasible = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto inst = testing::random_farkas_instance(rng, 1 + t % 3);
        const bool lp = farkas_feasible(inst.A, inst.b);
        if (lp != testing::grid_lambda_feasible(inst.A, inst.b, 1e-3, 1e-6)) ++mismatches;
        if (!lp) ++infeasible;
    }
    return {mismatches == 0, "1000 instances (" + std::to_string(infeasible) + " infeasible), " +
                                 std::to_string(mismatches) + " mismatches"};
}

Outcome criterion7(const std::vector<Example>& all) {
    std::mt19937_64 rng(7);
    std::size_t compared = 0, failures = 0;
    double worst = 0.0;
    constexpr double step = 1e-6;
    auto compare = [&](const std::vector<double>& g, const std::function<double(const std::vector<double>&)>& fn,
                       const std::vector<double>& x) {
        double gn = 0.0, dn = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double fd = testing::central_difference(fn, x, i, step);
            gn += g[i] * g[i];
            dn += (g[i] - fd) * (g[i] - fd);
        }
        if (std::sqrt(gn) <= 1e-3) return;
        const double rel = std::sqrt(dn / gn);
        worst = std::max(worst, rel);
        ++compared;
        if (rel > 1e-5) ++failures;
    };
    for (const auto& e : all) {
        if (!e.cert.certified()) return {false, e.file + " is not certified"};
        const BarrierCandidate cand = candidate(e.cert);
        const int n = e.cert.problem.n;
        std::vector<Expr> dh;
        for (int i = 0; i < n; ++i) dh.push_back(differentiate(cand.h_sm, i));
        const PatchedCLBF W = patched_from(e.cert);
        const IntervalBox box = e.cert.problem.box();
        for (int k = 0; k < 1000; ++k) {
            const auto x = random_point(box, rng);
            std::vector<double> g;
            for (const auto& d : dh) g.push_back(eval_point(d, x));
            compare(g, [&](const std::vector<double>& y) { return eval_point(cand.h_sm, y); }, x);
            compare(W.grad(x), [&](const std::vector<double>& y) { return W.evaluate(y).W; }, x);
        }
    }
    return {failures == 0, std::to_string(compared) + " gradients, " + std::to_string(failures) +
                               " above tolerance, worst relative error " + fmt(worst, 3)};
}

Outcome criterion8() {
    const Expr h = lse(4.5, testing::toy_constraints());
    const Expr d0 = differentiate(h, 0), d1 = differentiate(h, 1);
    std::vector<double> x{0.1, 0.9};
    double gnorm = 1.0;
    int it = 0;
    for (; it < 200000 && gnorm > 1e-12; ++it) {
        const double g0 = eval_point(d0, x), g1 = eval_point(d1, x);
        gnorm = std::hypot(g0, g1);
        x[0] -= 0.05 * g0;
        x[1] -= 0.05 * g1;
    }
    const double dist = std::hypot(x[0] - 0.1294085, x[1] - 0.94176161);
    return {dist <= 1e-3 && gnorm <= 1e-8, "reached (" + fmt(x[0], 8) + ", " + fmt(x[1], 8) + ") after " +
                                              std::to_string(it) + " steps, |grad| " + fmt(gnorm, 3) +
                                              ", distance " + fmt(dist, 3)};
}

SimulationReport toy_simulation(const Certificate& c, double T) {
    const PatchedCLBF W = patched_from(c);
    const ProblemSpec& p = c.problem;
    SimulationOptions opt;
    opt.dt = 1e-3;
    opt.T = T;
    const auto starts = sample_initial_states(W, p.box(), 50, p.simulation.seed, 1e-3);
    return simulate_batch(W, p.field(), c.clf->local_gain, p.box(), starts, opt);
}

Outcome criterion9(const Example& toy) {
    if (!toy.cert.certified()) return {false, "toy example is not certified"};
    const SimulationReport r = toy_simulation(toy.cert, 20.0);
    int near = 0;
    for (const auto& s : r.runs) near += s.final_norm <= 1e-2 ? 1 : 0;
    const bool ok = near == 50 && r.unsafe == 0 && r.max_h <= 1.0 + 1e-6 && r.max_W_increase <= 1e-6;
    std::string d = std::to_string(near) + "/50 within 1e-2 at T = 20, unsafe " + std::to_string(r.unsafe) +
                    ", max h " + fmt(r.max_h, 8) + ", max W step increase " + fmt(r.max_W_increase, 3);
    if (!ok) {
        const SimulationReport longer = toy_simulation(toy.cert, 100.0);
        int reached = 0;
        for (const auto& s : longer.runs) reached += s.final_norm <= 1e-2 ? 1 : 0;
        d += "; with T = 100: " + std::to_string(reached) + "/50 within 1e-2, max h " + fmt(longer.max_h, 8);
    }
    return {ok, d};
}

Outcome criterion10() {
    testing::RandomExpr gen(2, 10);
    std::mt19937_64 rng(10);
    int verified = 0, refuted = 0, bad_witness = 0, violations = 0;
    for (int t = 0; t < 2000 && verified < 50; ++t) {
        const auto q = testing::random_query(gen, rng);
        if (!q) continue;
        Verdict v;
        try {
            v = check(*q);
        } catch (const ResourceExhausted&) {
            continue;
        }
        const testing::PremiseSampler s(*q);
        if (!is_verified(v)) {
            const auto& w = std::get<VerdictCounterexample>(v);
            bool valid = q->box.contains(w.point) && eval_point(q->goal, w.point) >= -q->delta;
            for (const auto& e : q->equalities) valid = valid && std::abs(eval_point(e, w.point)) <= q->delta;
            for (const auto& c : q->intervals) {
                const double val = eval_point(c.expr, w.point);
                valid = valid && val >= c.lo - q->delta && val <= c.hi + q->delta;
            }
            bad_witness += valid ? 0 : 1;
            ++refuted;
            continue;
        }
        ++verified;
        for (int k = 0; k < 100000; ++k) {
            const auto x = s.sample(rng);
            if (x && s.goal(*x) >= 0.0 && eval_point(q->goal, *x) >= 0.0) ++violations;
        }
    }
    const bool ok = verified == 50 && violations == 0 && bad_witness == 0;
    return {ok, std::to_string(verified) + " verified queries audited, " + std::to_string(violations) +
                    " violations; " + std::to_string(refuted) + " witnesses, " + std::to_string(bad_witness) +
                    " invalid"};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CLBF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome criterion11(const Example& toy, const Example& nonlinear) {
    const fs::path dir = fs::temp_directory_path() / "clbf_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const json& j) {
        const fs::path p = dir / name;
        write_json_file(p.string(), j);
        return p.string();
    };
    const json toy_j = to_json(toy.cert);
    const json nl_j = to_json(nonlinear.cert);
    const int clean_toy = run_cli("verify " + write("toy.json", toy_j));
    const int clean_nl = run_cli("verify " + write("nonlinear.json", nl_j));

    json eps = toy_j;
    eps["compatibility"]["epsilon"] = 0.9;
    eps["patch"]["epsilon"] = 0.9;
    json cut = nl_j;
    if (!cut["barrier"]["cuts"].empty()) cut["barrier"]["cuts"].erase(cut["barrier"]["cuts"].size() - 1);
    json tau = toy_j;
    tau["barrier"]["tau"] = 4.0;

    const int c_eps = run_cli("verify " + write("eps.json", eps));
    const int c_cut = run_cli("verify " + write("cut.json", cut));
    const int c_tau = run_cli("verify " + write("tau.json", tau));
    const bool ok = clean_toy == kExitOk && clean_nl == kExitOk && c_eps == kExitFailure && c_cut == kExitFailure &&
                    c_tau == kExitFailure && !nonlinear.cert.barrier->cuts.empty();
    return {ok, "exit codes: untouched " + std::to_string(clean_toy) + "/" + std::to_string(clean_nl) +
                    ", epsilon inflated " + std::to_string(c_eps) + ", cut removed " + std::to_string(c_cut) +
                    ", tau altered " + std::to_string(c_tau)};
}

}  // namespace

int main() {
    std::map<int, Outcome> out;
    auto report = [&](int k, Outcome o) {
        std::cout << "criterion " << std::setw(2) << k << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
                  << std::endl;
        out[k] = std::move(o);
    };

    const Example toy = run_example("ex1_toy");
    report(1, criterion1(toy));
    const Example nonlinear = run_example("ex2_nonlinear");
    report(2, criterion2(nonlinear));
    const Example linear = run_example("ex3_linear");
    const Example power = run_example("ex4_power");
    report(3, criterion3(linear, power));
    const std::vector<Example> all{toy, nonlinear, linear, power};
    report(4, criterion4(all));
    report(5, criterion5(all));
    report(6, criterion6());
    report(7, criterion7(all));
    report(8, criterion8());
    report(9, criterion9(toy));
    report(10, criterion10());
    report(11, criterion11(toy, nonlinear));

    int passed = 0;
    bool unexpected = false;
    for (const auto& [k, o] : out) {
        if (o.pass) {
            ++passed;
        } else if (kKnownShortfalls.count(k)) {
            std::cout << "criterion " << k << " fails and is a documented known shortfall\n";
        } else {
            unexpected = true;
        }
    }
    std::cout << passed << "/" << out.size() << " criteria pass"
              << (unexpected ? "; unexpected failures present" : "") << '\n';
    return unexpected ? 1 : 0;
}
