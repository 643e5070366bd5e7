// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Certificate files: JSON documents with schema "clbf-certificate/1" holding
// everything needed to replay the three verifier queries and rebuild W.
// Wall-clock data lives only under "created" and "timing".

#include <chrono>
#include <ctime>
#include <optional>
#include <string>
#include <vector>

#include "clbf/barrier.hpp"
#include "clbf/problem.hpp"

#ifndef CLBF_VERSION
#define CLBF_VERSION "0.1.0"
#endif

namespace clbf {

inline constexpr const char* kCertificateSchema = "clbf-certificate/1";

struct CertVerdict {
    std::string digest;
    std::uint64_t boxes = 0;
    double delta = 0.0;

    bool operator==(const CertVerdict&) const = default;
};

inline CertVerdict cert_verdict(const VerdictVerified& v) { return {v.digest, v.boxes, v.delta}; }

struct CertRefineStep {
    int iteration = 0;
    std::string verdict;
    std::vector<double> witness;
    double goal_value = 0.0;
    std::optional<HalfSpaceCut> cut;
    double h_after = 0.0;
    std::uint64_t boxes = 0;

    bool operator==(const CertRefineStep&) const = default;
};

struct CertBarrier {
    double tau = 1.0;
    std::vector<std::string> constraints;
    std::vector<HalfSpaceCut> cuts;
    std::string h_sm;
    std::optional<CertVerdict> verdict;

    bool operator==(const CertBarrier&) const = default;
};

struct CertClf {
    std::string V;
    /// "problem" or "grid".
    std::string source;
    /// Half the Hessian of V at the origin.
    std::vector<std::vector<double>> P;
    double origin_radius = 0.1;
    CertVerdict verdict;
    double local_gain = 0.0;
    double local_max_eig = 0.0;
    double local_margin = 1e-6;

    bool operator==(const CertClf&) const = default;
};

struct CertProbe {
    double epsilon = 0.0;
    std::string outcome;

    bool operator==(const CertProbe&) const = default;
};

struct CertBand {
    double epsilon = 0.0;
    bool cap_active = false;
    CertVerdict verdict;
    std::vector<CertProbe> probes;

    bool operator==(const CertBand&) const = default;
};

struct CertRegion {
    std::string name;
    std::string condition;
    std::string W;
    std::vector<std::string> grad;

    bool operator==(const CertRegion&) const = default;
};

struct CertPatch {
    double epsilon = 0.0;
    double alpha = 0.0;
    double V_upper = 0.0;
    double V_lower = 0.0;
    std::uint64_t boxes = 0;
    std::vector<CertRegion> regions;

    bool operator==(const CertPatch&) const = default;
};

struct CertFailure {
    std::string stage;
    std::string kind;
    std::string message;
    std::vector<double> witness;
    std::optional<double> goal_value;

    bool operator==(const CertFailure&) const = default;
};

struct Certificate {
    std::string tool_version = CLBF_VERSION;
    std::string created;
    ProblemSpec problem;
    std::string problem_digest;
    /// "certified" or "failed".
    std::string status = "failed";
    std::optional<CertFailure> failure;
    std::optional<CertBarrier> barrier;
    std::vector<CertRefineStep> refinement_log;
    std::optional<CertClf> clf;
    std::optional<CertBand> compatibility;
    std::optional<CertPatch> patch;
    std::vector<std::string> divergences;
    json timing = json::object();

    bool operator==(const Certificate&) const = default;

    [[nodiscard]] bool certified() const { return status == "certified"; }
};

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

inline json verdict_json(const CertVerdict& v) { return {{"digest", v.digest}, {"boxes", v.boxes}, {"delta", v.delta}}; }

inline CertVerdict verdict_from(const json& j) {
    return {j.at("digest").get<std::string>(), j.at("boxes").get<std::uint64_t>(), j.at("delta").get<double>()};
}

inline json cut_json(const HalfSpaceCut& c) {
    return {{"normal", c.normal}, {"offset", c.offset}, {"witness", c.witness}};
}

inline HalfSpaceCut cut_from(const json& j) {
    HalfSpaceCut c;
    c.normal = j.at("normal").get<std::vector<double>>();
    c.offset = j.at("offset").get<double>();
    c.witness = j.value("witness", std::vector<double>{});
    return c;
}

template <class T, class F>
json optional_json(const std::optional<T>& v, F&& f) {
    return v ? f(*v) : json(nullptr);
}

}  // namespace detail

inline json to_json(const Certificate& c) {
    using namespace detail;
    json j;
    j["schema"] = kCertificateSchema;
    j["tool"] = {{"name", "clbf"}, {"version", c.tool_version}};
    j["created"] = c.created;
    j["problem"] = c.problem.to_json();
    j["problem_digest"] = c.problem_digest;
    j["status"] = c.status;
    j["failure"] = optional_json(c.failure, [](const CertFailure& f) {
        json o{{"stage", f.stage}, {"kind", f.kind}, {"message", f.message}, {"witness", f.witness}};
        o["goal_value"] = f.goal_value ? json(*f.goal_value) : json(nullptr);
        return o;
    });
    j["barrier"] = optional_json(c.barrier, [](const CertBarrier& b) {
        json cuts = json::array();
        for (const auto& cut : b.cuts) cuts.push_back(cut_json(cut));
        return json{{"tau", b.tau},
                    {"constraints", b.constraints},
                    {"cuts", cuts},
                    {"h_sm", b.h_sm},
                    {"verdict", optional_json(b.verdict, verdict_json)}};
    });
    json log = json::array();
    for (const auto& r : c.refinement_log) {
        log.push_back({{"iteration", r.iteration},
                       {"verdict", r.verdict},
                       {"witness", r.witness},
                       {"goal_value", r.goal_value},
                       {"cut", optional_json(r.cut, cut_json)},
                       {"h_after", r.h_after},
                       {"boxes", r.boxes}});
    }
    j["refinement_log"] = log;
    j["clf"] = optional_json(c.clf, [](const CertClf& v) {
        return json{{"V", v.V},
                    {"source", v.source},
                    {"P", v.P},
                    {"origin_radius", v.origin_radius},
                    {"verdict", verdict_json(v.verdict)},
                    {"local", {{"gain", v.local_gain}, {"max_eig", v.local_max_eig}, {"margin", v.local_margin}}}};
    });
    j["compatibility"] = optional_json(c.compatibility, [](const CertBand& b) {
        json probes = json::array();
        for (const auto& p : b.probes) probes.push_back({{"epsilon", p.epsilon}, {"outcome", p.outcome}});
        return json{{"epsilon", b.epsilon}, {"cap_active", b.cap_active}, {"verdict", verdict_json(b.verdict)}, {"probes", probes}};
    });
    j["patch"] = optional_json(c.patch, [](const CertPatch& p) {
        json regions = json::array();
        for (const auto& r : p.regions) {
            regions.push_back({{"name", r.name}, {"condition", r.condition}, {"W", r.W}, {"grad", r.grad}});
        }
        return json{{"epsilon", p.epsilon},
                    {"alpha", p.alpha},
                    {"V_upper", p.V_upper},
                    {"V_lower", p.V_lower},
                    {"boxes", p.boxes},
                    {"regions", regions}};
    });
    j["seeds"] = {{"r_seed", c.problem.params.r_seed}, {"simulation", c.problem.simulation.seed}};
    j["divergences"] = c.divergences;
    j["timing"] = c.timing;
    return j;
}

/// Throws ParseError on schema or type problems.
inline Certificate certificate_from_json(const json& j) {
    using namespace detail;
    try {
        if (j.value("schema", "") != kCertificateSchema) {
            throw ParseError(std::string("certificate schema must be \"") + kCertificateSchema + "\"");
        }
        Certificate c;
        c.tool_version = j.at("tool").at("version").get<std::string>();
        c.created = j.at("created").get<std::string>();
        c.problem = ProblemSpec::from_json(j.at("problem"));
        c.problem_digest = j.at("problem_digest").get<std::string>();
        c.status = j.at("status").get<std::string>();
        if (const json& f = j.at("failure"); !f.is_null()) {
            CertFailure out{f.at("stage").get<std::string>(), f.at("kind").get<std::string>(),
                            f.at("message").get<std::string>(), f.at("witness").get<std::vector<double>>(), std::nullopt};
            if (!f.at("goal_value").is_null()) out.goal_value = f["goal_value"].get<double>();
            c.failure = std::move(out);
        }
        if (const json& b = j.at("barrier"); !b.is_null()) {
            CertBarrier out;
            out.tau = b.at("tau").get<double>();
            out.constraints = b.at("constraints").get<std::vector<std::string>>();
            for (const auto& cut : b.at("cuts")) out.cuts.push_back(cut_from(cut));
            out.h_sm = b.at("h_sm").get<std::string>();
            if (!b.at("verdict").is_null()) out.verdict = verdict_from(b["verdict"]);
            c.barrier = std::move(out);
        }
        for (const auto& r : j.at("refinement_log")) {
            CertRefineStep s;
            s.iteration = r.at("iteration").get<int>();
            s.verdict = r.at("verdict").get<std::string>();
            s.witness = r.at("witness").get<std::vector<double>>();
            s.goal_value = r.at("goal_value").get<double>();
            if (!r.at("cut").is_null()) s.cut = cut_from(r["cut"]);
            s.h_after = r.at("h_after").get<double>();
            s.boxes = r.at("boxes").get<std::uint64_t>();
            c.refinement_log.push_back(std::move(s));
        }
        if (const json& v = j.at("clf"); !v.is_null()) {
            CertClf out;
            out.V = v.at("V").get<std::string>();
            out.source = v.at("source").get<std::string>();
            out.P = v.at("P").get<std::vector<std::vector<double>>>();
            out.origin_radius = v.at("origin_radius").get<double>();
            out.verdict = verdict_from(v.at("verdict"));
            out.local_gain = v.at("local").at("gain").get<double>();
            out.local_max_eig = v.at("local").at("max_eig").get<double>();
            out.local_margin = v.at("local").at("margin").get<double>();
            c.clf = std::move(out);
        }
        if (const json& b = j.at("compatibility"); !b.is_null()) {
            CertBand out;
            out.epsilon = b.at("epsilon").get<double>();
            out.cap_active = b.at("cap_active").get<bool>();
            out.verdict = verdict_from(b.at("verdict"));
            for (const auto& p : b.at("probes")) {
                out.probes.push_back({p.at("epsilon").get<double>(), p.at("outcome").get<std::string>()});
            }
            c.compatibility = std::move(out);
        }
        if (const json& p = j.at("patch"); !p.is_null()) {
            CertPatch out;
            out.epsilon = p.at("epsilon").get<double>();
            out.alpha = p.at("alpha").get<double>();
            out.V_upper = p.at("V_upper").get<double>();
            out.V_lower = p.at("V_lower").get<double>();
            out.boxes = p.at("boxes").get<std::uint64_t>();
            for (const auto& r : p.at("regions")) {
                out.regions.push_back({r.at("name").get<std::string>(), r.at("condition").get<std::string>(),
                                       r.at("W").get<std::string>(), r.at("grad").get<std::vector<std::string>>()});
            }
            c.patch = std::move(out);
        }
        c.divergences = j.at("divergences").get<std::vector<std::string>>();
        c.timing = j.value("timing", json::object());
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("certificate file: ") + e.what());
    }
}

inline Certificate load_certificate(const std::string& path) { return certificate_from_json(read_json_file(path)); }

inline void save_certificate(const std::string& path, const Certificate& c) { write_json_file(path, to_json(c)); }

}  // namespace clbf
