// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Problem files: JSON documents with schema "clbf-problem/1". Expressions
// and domain bounds are infix strings ("pi", "1710/57.9" are fine).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "clbf/barrier.hpp"
#include "clbf/digest.hpp"
#include "clbf/errors.hpp"
#include "clbf/expr.hpp"
#include "clbf/parse.hpp"
#include "json.hpp"

namespace clbf {

using json = nlohmann::ordered_json;

inline constexpr const char* kProblemSchema = "clbf-problem/1";

struct Parameters {
    double tau = 1.0;
    double delta = 1e-4;
    double theta = 0.05;
    double cut_margin = 0.01;
    int k_max = 25;
    int r_seed = 0;
    double eps_cap = 0.5;
    double eps_tol = 1e-3;
    double origin_radius = 0.1;
    double min_box_width = 1e-5;
    std::uint64_t budget = 5'000'000;

    bool operator==(const Parameters&) const = default;
};

struct SimulationSettings {
    int count = 50;
    double dt = 1e-3;
    double T = 20.0;
    std::uint64_t seed = 1;
    /// Initial states are drawn from {h <= 1 - margin}.
    double margin = 1e-3;

    bool operator==(const SimulationSettings&) const = default;
};

struct ProblemSpec {
    std::string name;
    int n = 0;
    int m = 0;
    std::vector<std::string> f;
    std::vector<std::vector<std::string>> g;
    std::vector<std::string> constraints;
    std::vector<std::pair<std::string, std::string>> domain;
    Parameters params;
    /// Infix V, or "auto" for the diagonal grid search.
    std::string V = "auto";
    std::vector<double> clf_grid{0.5, 1.0, 2.0, 5.0, 10.0};
    SimulationSettings simulation;

    bool operator==(const ProblemSpec&) const = default;

    [[nodiscard]] VectorField field() const {
        VectorField vf;
        vf.n = n;
        vf.m = m;
        for (const auto& s : f) vf.f.push_back(parse_expr(s, n));
        for (const auto& row : g) {
            std::vector<Expr> r;
            for (const auto& s : row) r.push_back(parse_expr(s, n));
            vf.g.push_back(std::move(r));
        }
        return vf;
    }

    [[nodiscard]] IntervalBox box() const {
        std::vector<Interval> dims;
        for (const auto& [lo, hi] : domain) dims.emplace_back(parse_constant(lo), parse_constant(hi));
        return IntervalBox(std::move(dims));
    }

    [[nodiscard]] ConstraintSet constraint_set() const {
        ConstraintSet cs;
        for (const auto& s : constraints) cs.h.push_back(parse_expr(s, n));
        cs.domain = box();
        return cs;
    }

    [[nodiscard]] bool auto_clf() const { return V == "auto"; }
    [[nodiscard]] Expr clf() const { return parse_expr(V, n); }

    /// Throws ParseError or SpecError.
    void validate() const {
        if (n < 1 || m < 1) throw SpecError("dimensions n and m must be positive");
        if (static_cast<int>(f.size()) != n) throw SpecError("f must have n entries");
        if (static_cast<int>(g.size()) != n) throw SpecError("g must have n rows");
        for (const auto& row : g) {
            if (static_cast<int>(row.size()) != m) throw SpecError("each row of g must have m entries");
        }
        if (static_cast<int>(domain.size()) != n) throw SpecError("domain must have n intervals");
        const IntervalBox b = box();
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (!b[i].is_finite() || !(b[i].lo < b[i].hi)) throw SpecError("domain bounds must be finite with lo < hi");
        }
        const VectorField vf = field();
        vf.validate();
        const std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            if (std::abs(eval_point(vf.f[static_cast<std::size_t>(i)], zero)) > 1e-9) throw SpecError("f(0) must vanish");
        }
        constraint_set().validate();
        if (!auto_clf()) (void)clf();
        if (auto_clf() && clf_grid.empty()) throw SpecError("clf_grid must not be empty");
        const Parameters& p = params;
        if (!(p.tau > 0.0)) throw SpecError("tau must be positive");
        if (!(p.delta > 0.0)) throw SpecError("delta must be positive");
        if (!(p.theta > 0.0 && p.theta < std::numbers::pi / 2)) throw SpecError("theta must lie in (0, pi/2)");
        if (!(p.cut_margin > 0.0)) throw SpecError("cut_margin must be positive");
        if (p.k_max < 0) throw SpecError("k_max must be non-negative");
        if (!(p.eps_cap > 0.0 && p.eps_cap < 1.0)) throw SpecError("eps_cap must lie in (0, 1)");
        if (!(p.eps_tol > 0.0)) throw SpecError("eps_tol must be positive");
        if (!(p.origin_radius > 0.0)) throw SpecError("origin_radius must be positive");
        if (!(p.min_box_width > 0.0)) throw SpecError("min_box_width must be positive");
        if (!(simulation.dt > 0.0 && simulation.T > simulation.dt)) throw SpecError("simulation needs dt > 0 and T > dt");
        if (simulation.count < 0) throw SpecError("simulation count must be non-negative");
    }

    [[nodiscard]] json to_json() const {
        json j;
        j["schema"] = kProblemSchema;
        j["name"] = name;
        j["n"] = n;
        j["m"] = m;
        j["f"] = f;
        j["g"] = g;
        j["constraints"] = constraints;
        json d = json::array();
        for (const auto& [lo, hi] : domain) d.push_back({lo, hi});
        j["domain"] = d;
        j["parameters"] = {{"tau", params.tau},
                           {"delta", params.delta},
                           {"theta", params.theta},
                           {"cut_margin", params.cut_margin},
                           {"k_max", params.k_max},
                           {"r_seed", params.r_seed},
                           {"eps_cap", params.eps_cap},
                           {"eps_tol", params.eps_tol},
                           {"origin_radius", params.origin_radius},
                           {"min_box_width", params.min_box_width},
                           {"budget", params.budget}};
        j["V"] = V;
        j["clf_grid"] = clf_grid;
        j["simulation"] = {{"count", simulation.count},
                           {"dt", simulation.dt},
                           {"T", simulation.T},
                           {"seed", simulation.seed},
                           {"margin", simulation.margin}};
        return j;
    }

    /// Throws ParseError on schema or type problems.
    static ProblemSpec from_json(const json& j) {
        try {
            if (j.value("schema", "") != kProblemSchema) {
                throw ParseError(std::string("problem schema must be \"") + kProblemSchema + "\"");
            }
            ProblemSpec p;
            p.name = j.at("name").get<std::string>();
            p.n = j.at("n").get<int>();
            p.m = j.at("m").get<int>();
            p.f = j.at("f").get<std::vector<std::string>>();
            p.g = j.at("g").get<std::vector<std::vector<std::string>>>();
            p.constraints = j.at("constraints").get<std::vector<std::string>>();
            for (const auto& d : j.at("domain")) {
                auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
                if (!d.is_array() || d.size() != 2) throw ParseError("each domain entry must be [lo, hi]");
                p.domain.emplace_back(text(d[0]), text(d[1]));
            }
            if (j.contains("parameters")) {
                const json& q = j["parameters"];
                Parameters& P = p.params;
                P.tau = q.value("tau", P.tau);
                P.delta = q.value("delta", P.delta);
                P.theta = q.value("theta", P.theta);
                P.cut_margin = q.value("cut_margin", P.cut_margin);
                P.k_max = q.value("k_max", P.k_max);
                P.r_seed = q.value("r_seed", P.r_seed);
                P.eps_cap = q.value("eps_cap", P.eps_cap);
                P.eps_tol = q.value("eps_tol", P.eps_tol);
                P.origin_radius = q.value("origin_radius", P.origin_radius);
                P.min_box_width = q.value("min_box_width", P.min_box_width);
                P.budget = q.value("budget", P.budget);
            }
            p.V = j.value("V", p.V);
            if (j.contains("clf_grid")) p.clf_grid = j["clf_grid"].get<std::vector<double>>();
            if (j.contains("simulation")) {
                const json& s = j["simulation"];
                SimulationSettings& S = p.simulation;
                S.count = s.value("count", S.count);
                S.dt = s.value("dt", S.dt);
                S.T = s.value("T", S.T);
                S.seed = s.value("seed", S.seed);
                S.margin = s.value("margin", S.margin);
            }
            return p;
        } catch (const json::exception& e) {
            throw ParseError(std::string("problem file: ") + e.what());
        }
    }

    [[nodiscard]] std::string digest() const { return fnv1a_hex(to_json().dump()); }
};

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

/// Reads and validates a problem file.
inline ProblemSpec load_problem(const std::string& path) {
    ProblemSpec p = ProblemSpec::from_json(read_json_file(path));
    p.validate();
    return p;
}

}  // namespace clbf
