// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sontag's universal formula on the patched function W and fixed-step RK4
// simulation with sample-and-hold input.
//
//     u = -((a + sqrt(a^2 + |B|^4)) / |B|^2) B^T,   a = L_f W,  B = L_g W,
//
// which gives dW/dt = -sqrt(a^2 + |B|^4). Close to the origin the controller
// switches to the linear feedback from the local check.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "clbf/errors.hpp"
#include "clbf/expr.hpp"
#include "clbf/interval.hpp"
#include "clbf/patch.hpp"
#include "clbf/tape.hpp"

namespace clbf {

/// Numeric drift and input matrix of a vector field.
class FieldEvaluator {
public:
    FieldEvaluator() = default;
    explicit FieldEvaluator(const VectorField& vf) : n_(vf.n), m_(vf.m) {
        std::vector<Expr> outs = vf.f;
        for (const auto& row : vf.g) outs.insert(outs.end(), row.begin(), row.end());
        tape_ = Tape(outs, static_cast<std::size_t>(vf.n));
    }

    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int m() const { return m_; }

    /// f(x) followed by g(x) in row-major order.
    [[nodiscard]] std::vector<double> eval(std::span<const double> x) const { return tape_.eval(x); }

    /// f(x) + g(x) u.
    [[nodiscard]] std::vector<double> closed_loop(std::span<const double> x, std::span<const double> u) const {
        const auto v = tape_.eval(x);
        std::vector<double> dx(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            double s = v[static_cast<std::size_t>(i)];
            for (int j = 0; j < m_; ++j) s += v[static_cast<std::size_t>(n_ + i * m_ + j)] * u[static_cast<std::size_t>(j)];
            dx[static_cast<std::size_t>(i)] = s;
        }
        return dx;
    }

private:
    int n_ = 0;
    int m_ = 0;
    Tape tape_;
};

struct SontagTerms {
    double a = 0.0;
    std::vector<double> B;
};

/// Sontag's formula for given (a, B).
inline std::vector<double> sontag_formula(double a, std::span<const double> B) {
    double b2 = 0.0;
    for (double v : B) b2 += v * v;
    std::vector<double> u(B.size(), 0.0);
    if (std::sqrt(b2) > 1e-9) {
        const double k = (a + std::sqrt(a * a + b2 * b2)) / b2;
        for (std::size_t j = 0; j < B.size(); ++j) u[j] = -k * B[j];
        return u;
    }
    if (a < 0.0) return u;
    throw ControlUndefined("L_g W vanishes while L_f W = " + std::to_string(a) + " is not negative");
}

class SontagController {
public:
    /// `local_gain` is the feedback gain from the local check; the feedback
    /// -gain G(0)^T P x, P = Hessian(V)(0) / 2, is used inside `switch_radius`.
    SontagController(const PatchedCLBF& W, const VectorField& vf, double local_gain, double switch_radius = 1e-3)
        : W_(&W), field_(vf), switch_radius_(switch_radius) {
        const int n = vf.n;
        const std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
        Eigen::MatrixXd H(n, n);
        for (int i = 0; i < n; ++i) {
            const Expr di = differentiate(W.V(), i);
            for (int j = 0; j < n; ++j) H(i, j) = eval_point(differentiate(di, j), zero);
        }
        const Eigen::MatrixXd P = 0.25 * (H + H.transpose());
        Eigen::MatrixXd G(n, vf.m);
        const auto v = field_.eval(zero);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < vf.m; ++j) G(i, j) = v[static_cast<std::size_t>(n + i * vf.m + j)];
        }
        K_ = -local_gain * G.transpose() * P;
    }

    [[nodiscard]] const FieldEvaluator& field() const { return field_; }
    [[nodiscard]] const PatchedCLBF& clbf() const { return *W_; }

    /// (L_f W, L_g W) at x.
    [[nodiscard]] SontagTerms terms(std::span<const double> x) const {
        const auto fg = field_.eval(x);
        const auto gw = W_->grad(x);
        const int n = field_.n();
        const int m = field_.m();
        SontagTerms t;
        t.B.assign(static_cast<std::size_t>(m), 0.0);
        for (int i = 0; i < n; ++i) {
            t.a += gw[static_cast<std::size_t>(i)] * fg[static_cast<std::size_t>(i)];
            for (int j = 0; j < m; ++j) t.B[static_cast<std::size_t>(j)] += gw[static_cast<std::size_t>(i)] * fg[static_cast<std::size_t>(n + i * m + j)];
        }
        return t;
    }

    [[nodiscard]] bool in_local_ball(std::span<const double> x) const {
        double r = 0.0;
        for (double v : x) r += v * v;
        return std::sqrt(r) < switch_radius_;
    }

    std::vector<double> operator()(std::span<const double> x) const {
        if (in_local_ball(x)) {
            const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
            const Eigen::VectorXd u = K_ * xv;
            return {u.data(), u.data() + u.size()};
        }
        const SontagTerms t = terms(x);
        return sontag_formula(t.a, t.B);
    }

private:
    const PatchedCLBF* W_;
    FieldEvaluator field_;
    double switch_radius_;
    Eigen::MatrixXd K_;
};

struct Trajectory {
    enum class Status { Converged, Horizon, Escaped };
    Status status = Status::Horizon;
    double dt = 0.0;
    std::vector<double> t;
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> u;
    std::vector<double> W;
    std::vector<double> h;

    [[nodiscard]] std::size_t size() const { return t.size(); }
};

inline const char* status_name(Trajectory::Status s) {
    switch (s) {
        case Trajectory::Status::Converged: return "converged";
        case Trajectory::Status::Horizon: return "horizon";
        case Trajectory::Status::Escaped: return "escaped";
    }
    return "?";
}

struct SimulationOptions {
    double dt = 1e-3;
    double T = 20.0;
    /// Stop once |x| drops below this.
    double converge_radius = 1e-3;
    /// Keep every k-th step in the record (the final step is always kept).
    std::size_t record_every = 1;
};

/// Fixed-step RK4 of dx/dt = f(x) + g(x) u with u held over each step.
/// `observe` returns (W, h) at a state for the record. Throws NumericBlowup
/// when |x| exceeds ten times the radius of the domain box.
inline Trajectory simulate(const FieldEvaluator& field,
                           const std::function<std::vector<double>(std::span<const double>)>& controller,
                           std::vector<double> x0, const IntervalBox& domain, const SimulationOptions& opt,
                           const std::function<std::pair<double, double>(std::span<const double>)>& observe = {}) {
    if (!(opt.dt > 0.0) || !(opt.T > opt.dt)) throw std::invalid_argument("simulate: need dt > 0 and T > dt");
    if (!domain.contains(x0)) throw std::invalid_argument("simulate: x0 outside the domain");
    double radius = 0.0;
    for (std::size_t i = 0; i < domain.size(); ++i) radius += std::pow(std::max(std::abs(domain[i].lo), std::abs(domain[i].hi)), 2);
    radius = std::sqrt(radius);
    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double c : v) s += c * c;
        return std::sqrt(s);
    };
    Trajectory tr;
    tr.dt = opt.dt;
    const std::size_t n = x0.size();
    std::vector<double> x = std::move(x0);
    auto record = [&](double t, const std::vector<double>& u) {
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.u.push_back(u);
        if (observe) {
            const auto [w, h] = observe(x);
            tr.W.push_back(w);
            tr.h.push_back(h);
        }
    };
    const auto steps = static_cast<std::size_t>(std::ceil(opt.T / opt.dt - 1e-9));
    std::vector<double> tmp(n);
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * opt.dt;
        if (norm(x) < opt.converge_radius) {
            tr.status = Trajectory::Status::Converged;
            record(t, std::vector<double>(static_cast<std::size_t>(field.m()), 0.0));
            return tr;
        }
        if (!domain.contains(x)) {
            tr.status = Trajectory::Status::Escaped;
            record(t, std::vector<double>(static_cast<std::size_t>(field.m()), 0.0));
            return tr;
        }
        const std::vector<double> u = controller(x);
        if (k >= steps) {
            tr.status = Trajectory::Status::Horizon;
            record(t, u);
            return tr;
        }
        if (k % std::max<std::size_t>(opt.record_every, 1) == 0) record(t, u);
        auto stage = [&](const std::vector<double>& base, const std::vector<double>& slope, double s) {
            for (std::size_t i = 0; i < n; ++i) tmp[i] = base[i] + s * slope[i];
            return field.closed_loop(tmp, u);
        };
        const auto k1 = field.closed_loop(x, u);
        const auto k2 = stage(x, k1, opt.dt / 2);
        const auto k3 = stage(x, k2, opt.dt / 2);
        const auto k4 = stage(x, k3, opt.dt);
        for (std::size_t i = 0; i < n; ++i) x[i] += opt.dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        const double r = norm(x);
        if (!std::isfinite(r) || r > 10.0 * radius) {
            throw NumericBlowup("state norm " + std::to_string(r) + " exceeds ten times the domain radius");
        }
    }
}

/// Simulation under the Sontag controller, recording W and h.
inline Trajectory simulate(const SontagController& ctrl, std::vector<double> x0, const IntervalBox& domain,
                           const SimulationOptions& opt) {
    const PatchedCLBF& W = ctrl.clbf();
    return simulate(
        ctrl.field(), [&](std::span<const double> x) { return ctrl(x); }, std::move(x0), domain, opt,
        [&](std::span<const double> x) {
            const auto e = W.evaluate(x);
            return std::make_pair(e.W, e.h);
        });
}

/// One row per recorded step: t, x_1..x_n, u_1..u_m, W, h.
inline void write_trajectory(std::ostream& os, const Trajectory& tr) {
    os.precision(12);
    if (tr.x.empty()) return;
    os << "# t";
    for (std::size_t i = 0; i < tr.x[0].size(); ++i) os << " x" << i + 1;
    for (std::size_t j = 0; j < tr.u[0].size(); ++j) os << " u" << j + 1;
    os << " W h\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        os << tr.t[k];
        for (double v : tr.x[k]) os << ' ' << v;
        for (double v : tr.u[k]) os << ' ' << v;
        os << ' ' << (tr.W.empty() ? 0.0 : tr.W[k]) << ' ' << (tr.h.empty() ? 0.0 : tr.h[k]) << '\n';
    }
}

}  // namespace clbf
