// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0

// clbf: synthesize, replay, simulate and export compatible Lyapunov-barrier
// certificates.
//
//   clbf synthesize problem.spec [-o out.cert.json]
//   clbf verify out.cert.json
//   clbf simulate out.cert.json [--count 50] [--seed 1] [-o dir]
//   clbf grid out.cert.json [--resolution 400] [-o dir]
//   clbf bench [--dir benchmarks] [-o dir]
//
// Exit codes: 0 success, 1 usage or parse error, 2 certification failure,
// 3 resource exhaustion.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "clbf/pipeline.hpp"

#ifndef CLBF_DEFAULT_BENCH_DIR
#define CLBF_DEFAULT_BENCH_DIR "benchmarks"
#endif

namespace {

using namespace clbf;

unsigned default_threads() {
    if (const char* env = std::getenv("CLBF_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return static_cast<unsigned>(n);
        } catch (const std::exception&) {
        }
        std::cerr << "ignoring CLBF_THREADS=" << env << '\n';
    }
    return 1;
}

struct Common {
    unsigned threads = default_threads();
    bool trace = false;

    [[nodiscard]] CheckOptions check() const {
        CheckOptions c;
        c.threads = threads;
        c.trace = trace;
        return c;
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--threads", c.threads, "Verifier worker threads (default: CLBF_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--trace", c.trace, "Print verifier progress every 10000 boxes");
}

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--delta", o.delta, "Verifier precision");
    cmd->add_option("--tau", o.tau, "Softmax temperature");
    cmd->add_option("--kmax", o.k_max, "Maximum number of cuts");
    cmd->add_option("--theta", o.theta, "Cut rotation angle");
    cmd->add_option("--cut-margin", o.cut_margin, "Cut offset margin");
    cmd->add_option("--eps-cap", o.eps_cap, "Upper limit of the band width");
    cmd->add_option("--origin-radius", o.origin_radius, "Radius of the locally checked origin ball");
    cmd->add_option("--budget", o.budget, "Box budget per verifier query");
}

int run_synthesize(const std::string& spec, std::string out, const Overrides& ov, const Common& cm) {
    ProblemSpec p = ProblemSpec::from_json(read_json_file(spec));
    ov.apply(p);
    p.validate();
    if (out.empty()) out = std::filesystem::path(spec).stem().string() + ".cert.json";
    const SynthesisResult r = synthesize(p, cm.check(), std::cout);
    save_certificate(out, r.certificate);
    std::cout << (r.exit_code == kExitOk ? "certificate" : "partial certificate") << " written to " << out << '\n';
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthesis and verification of compatible Lyapunov-barrier certificates"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(CLBF_VERSION));

    Common common;
    Overrides overrides;
    std::string path;
    std::string out;

    auto* syn = app.add_subcommand("synthesize", "Build a certificate from a problem file");
    syn->add_option("spec", path, "Problem file")->required()->check(CLI::ExistingFile);
    syn->add_option("-o,--output", out, "Certificate path (default: <spec>.cert.json)");
    add_overrides(syn, overrides);
    add_common(syn, common);

    auto* ver = app.add_subcommand("verify", "Replay every query stored in a certificate");
    ver->add_option("certificate", path, "Certificate file")->required()->check(CLI::ExistingFile);
    add_common(ver, common);

    int count = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t every = 1;
    auto* sim = app.add_subcommand("simulate", "Simulate the Sontag closed loop from sampled safe states");
    sim->add_option("certificate", path, "Certificate file")->required()->check(CLI::ExistingFile);
    sim->add_option("--count", count, "Number of trajectories (default: from the problem)")->check(CLI::NonNegativeNumber);
    sim->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { seed = s, seed_set = true; },
                                             "Sampling seed (default: from the problem)");
    sim->add_option("--record-every", every, "Keep every k-th step in trajectory files")->check(CLI::PositiveNumber);
    sim->add_option("-o,--output", out, "Output directory (default: simulation)");
    add_common(sim, common);

    int resolution = 400;
    auto* grd = app.add_subcommand("grid", "Export h_sm, W and the 1-level set on a grid");
    grd->add_option("certificate", path, "Certificate file")->required()->check(CLI::ExistingFile);
    grd->add_option("--resolution", resolution, "Grid points per axis")->check(CLI::Range(2, 100000));
    grd->add_option("-o,--output", out, "Output directory (default: grid)");

    std::string bench_dir = CLBF_DEFAULT_BENCH_DIR;
    auto* bench = app.add_subcommand("bench", "Synthesize every shipped benchmark and print a table");
    bench->add_option("--dir", bench_dir, "Directory of .spec files")->check(CLI::ExistingDirectory);
    bench->add_option("-o,--output", out, "Certificate directory (default: bench_out)");
    add_overrides(bench, overrides);
    add_common(bench, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*syn) return run_synthesize(path, out, overrides, common);
        if (*ver) {
            const Certificate c = load_certificate(path);
            const int code = verify_certificate(c, common.check(), std::cout);
            std::cout << (code == kExitOk ? "VERIFIED" : "NOT VERIFIED") << '\n';
            return code;
        }
        if (*sim) {
            const Certificate c = load_certificate(path);
            if (count < 0) count = c.problem.simulation.count;
            if (!seed_set) seed = c.problem.simulation.seed;
            return simulate_certificate(c, count, seed, out.empty() ? "simulation" : out, common.threads, std::cout,
                                        every);
        }
        if (*grd) {
            const Certificate c = load_certificate(path);
            const std::filesystem::path dir = out.empty() ? "grid" : out;
            const GridSummary s = export_grid(c, resolution, dir);
            std::cout << s.rows << " grid rows, " << s.segments << " level-set segments written to " << dir.string()
                      << '\n';
            return kExitOk;
        }
        if (*bench) return run_bench(bench_dir, out.empty() ? "bench_out" : out, overrides, common.check(), std::cout);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SpecError& e) {
        std::cerr << "invalid problem: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ResourceExhausted& e) {
        std::cerr << "resource exhausted: " << e.what() << '\n';
        return kExitExhausted;
    } catch (const UnsupportedDimension& e) {
        std::cerr << "unsupported: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
