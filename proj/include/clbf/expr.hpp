// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Immutable symbolic scalar expressions over a state vector x = (x1, ..., xn).
//
// Every function the synthesis pipeline manipulates (dynamics, constraints,
// softmax barrier, Lyapunov candidate, verifier goals) is an Expr. Nodes are
// shared, never mutated, and may be evaluated concurrently.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "clbf/errors.hpp"
#include "clbf/interval.hpp"

namespace clbf {

enum class Op : std::uint8_t {
    Var,
    Const,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,  // non-negative integer exponent stored in index
    Exp,
    Log,
    Sin,
    Cos,
    Lse,      // (1/tau) log sum_i exp(tau a_i); tau stored in value
    Softmax,  // i-th softmax weight of the arguments at temperature tau
};

class Expr;

struct Node {
    Op op = Op::Const;
    double value = 0.0;
    int index = 0;
    std::vector<Expr> args;
    std::size_t hash = 0;
};

class Expr {
public:
    Expr() : Expr(0.0) {}
    Expr(double c);  // NOLINT(google-explicit-constructor)

    static Expr constant(double c) { return Expr(c); }
    static Expr variable(int index);

    [[nodiscard]] Op op() const { return node_->op; }
    [[nodiscard]] double value() const { return node_->value; }
    [[nodiscard]] int index() const { return node_->index; }
    [[nodiscard]] std::span<const Expr> args() const { return node_->args; }
    [[nodiscard]] const Expr& arg(std::size_t i) const { return node_->args[i]; }
    [[nodiscard]] const Node* get() const { return node_.get(); }
    [[nodiscard]] std::size_t hash() const { return node_->hash; }

    [[nodiscard]] bool is_constant() const { return node_->op == Op::Const; }
    [[nodiscard]] bool is_constant(double c) const { return node_->op == Op::Const && node_->value == c; }

    /// Structural equality.
    friend bool operator==(const Expr& a, const Expr& b);

    static Expr make(Op op, double value, int index, std::vector<Expr> args);

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

namespace detail {

inline std::size_t hash_mix(std::size_t h, std::size_t v) {
    return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6U) + (h >> 2U));
}

}  // namespace detail

inline Expr Expr::make(Op op, double value, int index, std::vector<Expr> args) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = value;
    n->index = index;
    n->args = std::move(args);
    std::size_t h = std::hash<int>{}(static_cast<int>(op));
    h = detail::hash_mix(h, std::hash<std::uint64_t>{}(std::bit_cast<std::uint64_t>(value)));
    h = detail::hash_mix(h, std::hash<int>{}(index));
    for (const auto& a : n->args) h = detail::hash_mix(h, a.hash());
    n->hash = h;
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

inline Expr::Expr(double c) : Expr(make(Op::Const, c == 0.0 ? 0.0 : c, 0, {})) {}

inline Expr Expr::variable(int index) { return make(Op::Var, 0.0, index, {}); }

inline bool operator==(const Expr& a, const Expr& b) {
    if (a.get() == b.get()) return true;
    if (a.hash() != b.hash() || a.op() != b.op() || a.index() != b.index()) return false;
    if (std::bit_cast<std::uint64_t>(a.value()) != std::bit_cast<std::uint64_t>(b.value())) return false;
    if (a.args().size() != b.args().size()) return false;
    for (std::size_t i = 0; i < a.args().size(); ++i) {
        if (!(a.arg(i) == b.arg(i))) return false;
    }
    return true;
}

inline Expr var(int index) { return Expr::variable(index); }

// ---------------------------------------------------------------------------
// Builders. Only local rewrites are applied: constant folding, additive and
// multiplicative identities, 0*e, double negation.

inline Expr operator-(const Expr& a) {
    if (a.is_constant()) return Expr(-a.value());
    if (a.op() == Op::Neg) return a.arg(0);
    return Expr::make(Op::Neg, 0.0, 0, {a});
}

inline Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr(a.value() + b.value());
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return Expr::make(Op::Add, 0.0, 0, {a, b});
}

inline Expr operator-(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr(a.value() - b.value());
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    return Expr::make(Op::Sub, 0.0, 0, {a, b});
}

inline Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr(a.value() * b.value());
    if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return -b;
    if (b.is_constant(-1.0)) return -a;
    return Expr::make(Op::Mul, 0.0, 0, {a, b});
}

inline Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant() && b.value() != 0.0) return Expr(a.value() / b.value());
    if (a.is_constant(0.0) && !b.is_constant(0.0)) return Expr(0.0);
    if (b.is_constant(1.0)) return a;
    return Expr::make(Op::Div, 0.0, 0, {a, b});
}

inline Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
inline Expr& operator-=(Expr& a, const Expr& b) { return a = a - b; }
inline Expr& operator*=(Expr& a, const Expr& b) { return a = a * b; }

inline Expr pow(const Expr& a, unsigned k) {
    if (k == 0) return Expr(1.0);
    if (k == 1) return a;
    if (a.is_constant()) return Expr(detail::ipow(a.value(), k));
    return Expr::make(Op::Pow, 0.0, static_cast<int>(k), {a});
}

inline Expr exp(const Expr& a) {
    if (a.is_constant()) return Expr(std::exp(a.value()));
    return Expr::make(Op::Exp, 0.0, 0, {a});
}

inline Expr log(const Expr& a) {
    if (a.is_constant() && a.value() > 0.0) return Expr(std::log(a.value()));
    return Expr::make(Op::Log, 0.0, 0, {a});
}

inline Expr sin(const Expr& a) {
    if (a.is_constant()) return Expr(std::sin(a.value()));
    return Expr::make(Op::Sin, 0.0, 0, {a});
}

inline Expr cos(const Expr& a) {
    if (a.is_constant()) return Expr(std::cos(a.value()));
    return Expr::make(Op::Cos, 0.0, 0, {a});
}

/// Smooth maximum (1/tau) log sum_i exp(tau a_i). Requires tau > 0 and at
/// least one term.
inline Expr lse(double tau, std::vector<Expr> terms) {
    if (!(tau > 0.0)) throw std::invalid_argument("lse: temperature must be positive");
    if (terms.empty()) throw std::invalid_argument("lse: needs at least one term");
    return Expr::make(Op::Lse, tau, 0, std::move(terms));
}

/// exp(tau a_i) / sum_j exp(tau a_j); the derivative weights of lse.
inline Expr softmax_weight(int i, double tau, std::vector<Expr> terms) {
    if (!(tau > 0.0)) throw std::invalid_argument("softmax_weight: temperature must be positive");
    if (i < 0 || static_cast<std::size_t>(i) >= terms.size()) {
        throw std::invalid_argument("softmax_weight: index out of range");
    }
    return Expr::make(Op::Softmax, tau, i, std::move(terms));
}

/// Largest variable index referenced, or -1 for a closed expression.
inline int max_variable_index(const Expr& e) {
    std::unordered_map<const Node*, int> memo;
    std::function<int(const Expr&)> rec = [&](const Expr& x) -> int {
        if (x.op() == Op::Var) return x.index();
        if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
        int m = -1;
        for (const auto& a : x.args()) m = std::max(m, rec(a));
        memo.emplace(x.get(), m);
        return m;
    };
    return rec(e);
}

inline std::size_t node_count(const Expr& e) {
    std::unordered_map<const Node*, bool> seen;
    std::function<void(const Expr&)> rec = [&](const Expr& x) {
        if (!seen.emplace(x.get(), true).second) return;
        for (const auto& a : x.args()) rec(a);
    };
    rec(e);
    return seen.size();
}

// ---------------------------------------------------------------------------
// Differentiation

/// Exact partial derivative with respect to x_{var_index} (0-based).
inline Expr differentiate(const Expr& e, int var_index) {
    std::unordered_map<const Node*, Expr> memo;
    std::function<Expr(const Expr&)> d = [&](const Expr& x) -> Expr {
        if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
        Expr r;
        switch (x.op()) {
            case Op::Var: r = Expr(x.index() == var_index ? 1.0 : 0.0); break;
            case Op::Const: r = Expr(0.0); break;
            case Op::Neg: r = -d(x.arg(0)); break;
            case Op::Add: r = d(x.arg(0)) + d(x.arg(1)); break;
            case Op::Sub: r = d(x.arg(0)) - d(x.arg(1)); break;
            case Op::Mul: r = d(x.arg(0)) * x.arg(1) + x.arg(0) * d(x.arg(1)); break;
            case Op::Div: {
                const Expr& a = x.arg(0);
                const Expr& b = x.arg(1);
                const Expr da = d(a);
                const Expr db = d(b);
                if (db.is_constant(0.0)) {
                    r = da / b;
                } else {
                    r = (da * b - a * db) / pow(b, 2);
                }
                break;
            }
            case Op::Pow: {
                const unsigned k = static_cast<unsigned>(x.index());
                r = Expr(static_cast<double>(k)) * pow(x.arg(0), k - 1) * d(x.arg(0));
                break;
            }
            case Op::Exp: r = x * d(x.arg(0)); break;
            case Op::Log: r = d(x.arg(0)) / x.arg(0); break;
            case Op::Sin: r = cos(x.arg(0)) * d(x.arg(0)); break;
            case Op::Cos: r = -(sin(x.arg(0)) * d(x.arg(0))); break;
            case Op::Lse: {
                const std::vector<Expr> terms(x.args().begin(), x.args().end());
                Expr sum(0.0);
                for (std::size_t i = 0; i < terms.size(); ++i) {
                    const Expr di = d(terms[i]);
                    if (di.is_constant(0.0)) continue;
                    sum += softmax_weight(static_cast<int>(i), x.value(), terms) * di;
                }
                r = sum;
                break;
            }
            case Op::Softmax: {
                // dw_i = tau w_i (da_i - sum_k w_k da_k)
                const std::vector<Expr> terms(x.args().begin(), x.args().end());
                const Expr inner = d(terms[static_cast<std::size_t>(x.index())]) - d(lse(x.value(), terms));
                r = Expr(x.value()) * x * inner;
                break;
            }
        }
        memo.emplace(x.get(), r);
        return r;
    };
    return d(e);
}

inline std::vector<Expr> gradient(const Expr& e, int dim) {
    std::vector<Expr> g;
    g.reserve(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) g.push_back(differentiate(e, i));
    return g;
}

// ---------------------------------------------------------------------------
// Point evaluation

/// Double-precision evaluation. Throws DomainError on log of a non-positive
/// value or division by zero.
inline double eval_point(const Expr& e, std::span<const double> x) {
    std::unordered_map<const Node*, double> memo;
    std::function<double(const Expr&)> ev = [&](const Expr& n) -> double {
        switch (n.op()) {
            case Op::Const: return n.value();
            case Op::Var:
                if (n.index() < 0 || static_cast<std::size_t>(n.index()) >= x.size()) {
                    throw std::out_of_range("eval_point: variable index outside the state dimension");
                }
                return x[static_cast<std::size_t>(n.index())];
            default: break;
        }
        if (auto it = memo.find(n.get()); it != memo.end()) return it->second;
        double r = 0.0;
        switch (n.op()) {
            case Op::Neg: r = -ev(n.arg(0)); break;
            case Op::Add: r = ev(n.arg(0)) + ev(n.arg(1)); break;
            case Op::Sub: r = ev(n.arg(0)) - ev(n.arg(1)); break;
            case Op::Mul: r = ev(n.arg(0)) * ev(n.arg(1)); break;
            case Op::Div: {
                const double den = ev(n.arg(1));
                if (den == 0.0) throw DomainError("division by zero");
                r = ev(n.arg(0)) / den;
                break;
            }
            case Op::Pow: r = detail::ipow(ev(n.arg(0)), static_cast<unsigned>(n.index())); break;
            case Op::Exp: r = std::exp(ev(n.arg(0))); break;
            case Op::Log: {
                const double a = ev(n.arg(0));
                if (!(a > 0.0)) throw DomainError("log of a non-positive value");
                r = std::log(a);
                break;
            }
            case Op::Sin: r = std::sin(ev(n.arg(0))); break;
            case Op::Cos: r = std::cos(ev(n.arg(0))); break;
            case Op::Lse:
            case Op::Softmax: {
                std::vector<double> a;
                a.reserve(n.args().size());
                for (const auto& t : n.args()) a.push_back(ev(t));
                r = n.op() == Op::Lse ? lse_value(n.value(), a)
                                      : softmax_weight_value(static_cast<std::size_t>(n.index()), n.value(), a);
                break;
            }
            case Op::Const:
            case Op::Var: break;
        }
        memo.emplace(n.get(), r);
        return r;
    };
    return ev(e);
}

inline double eval_point(const Expr& e, std::initializer_list<double> x) {
    return eval_point(e, std::span<const double>(x.begin(), x.size()));
}

// ---------------------------------------------------------------------------
// Control-affine vector fields

/// dx/dt = f(x) + g(x) u with n states and m inputs; g is stored row-major
/// as n rows of m entries.
struct VectorField {
    int n = 0;
    int m = 0;
    std::vector<Expr> f;
    std::vector<std::vector<Expr>> g;

    /// Column j of g.
    [[nodiscard]] std::vector<Expr> g_column(int j) const {
        std::vector<Expr> c;
        c.reserve(static_cast<std::size_t>(n));
        for (const auto& row : g) c.push_back(row[static_cast<std::size_t>(j)]);
        return c;
    }

    /// Checks shapes and variable indices. Throws SpecError.
    void validate() const {
        if (n <= 0 || m <= 0) throw SpecError("vector field dimensions must be positive");
        if (f.size() != static_cast<std::size_t>(n)) throw SpecError("f must have n components");
        if (g.size() != static_cast<std::size_t>(n)) throw SpecError("g must have n rows");
        for (const auto& row : g) {
            if (row.size() != static_cast<std::size_t>(m)) throw SpecError("every row of g must have m entries");
            for (const auto& e : row) {
                if (max_variable_index(e) >= n) throw SpecError("g references a variable beyond x" + std::to_string(n));
            }
        }
        for (const auto& e : f) {
            if (max_variable_index(e) >= n) throw SpecError("f references a variable beyond x" + std::to_string(n));
        }
    }
};

struct LieDerivatives {
    Expr lf;
    std::vector<Expr> lg;  // one per input column
};

/// L_f s = grad(s) . f and L_{g_j} s = grad(s) . g_j.
inline LieDerivatives lie_derivatives(const Expr& scalar, const VectorField& vf) {
    const auto grad = gradient(scalar, vf.n);
    LieDerivatives out;
    out.lf = Expr(0.0);
    for (int i = 0; i < vf.n; ++i) out.lf += grad[static_cast<std::size_t>(i)] * vf.f[static_cast<std::size_t>(i)];
    out.lg.assign(static_cast<std::size_t>(vf.m), Expr(0.0));
    for (int j = 0; j < vf.m; ++j) {
        for (int i = 0; i < vf.n; ++i) {
            out.lg[static_cast<std::size_t>(j)] +=
                grad[static_cast<std::size_t>(i)] * vf.g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return out;
}

}  // namespace clbf
