// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared fixtures for the test suites: the example systems written out by
// hand, random expression generators, and finite-difference oracles. Nothing
// here goes through the library's derivative code.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "clbf/expr.hpp"
#include "clbf/parse.hpp"

namespace clbf::testing {

inline std::vector<Expr> parse_all(const std::vector<std::string>& texts, int dim) {
    std::vector<Expr> out;
    for (const auto& t : texts) out.push_back(parse_expr(t, dim));
    return out;
}

// 2-D toy system: f = [0, -sin x1], g = [1, -1]^T on [-pi, pi] x [-3, 4].
inline VectorField toy_field() {
    return {2, 1, parse_all({"0", "-sin(x1)"}, 2), {{Expr(1.0)}, {Expr(-1.0)}}};
}

inline std::vector<Expr> toy_constraints() {
    return parse_all({"-sin(x1) - cos(x1) - x2", "1 + x1 - pi", "1 - x1 - pi", "1 + x2 - 4", "1 - x2 - 3"}, 2);
}

// 2-D nonlinear system: f = [0, -x1 + x1^3/6], g = [1, -1]^T on [-4.5, 4.5]^2.
inline VectorField nonlinear_field() {
    return {2, 1, parse_all({"0", "-x1 + x1^3 / 6"}, 2), {{Expr(1.0)}, {Expr(-1.0)}}};
}

inline std::vector<Expr> nonlinear_constraints() {
    return parse_all({"-2 - x1 - x2", "1 + x1 - 4.5", "1 - x1 - 4.5", "1 + x2 - 4.5", "1 - x2 - 4.5"}, 2);
}

inline double central_difference(const std::function<double(const std::vector<double>&)>& fn,
                                  std::vector<double> x, std::size_t i, double step) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = fn(x);
    x[i] = x0 - step;
    const double fm = fn(x);
    return (fp - fm) / (2.0 * step);
}

inline double rel_err(double got, double want, double floor = 1e-300) {
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

/// Random well-formed expression over `dim` variables. log and division only
/// receive arguments bounded away from zero (1 + a^2 or exp(a)).
class RandomExpr {
public:
    RandomExpr(int dim, unsigned seed) : dim_(dim), rng_(seed) {}

    Expr operator()(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 11);
        switch (pick(rng_)) {
            case 0: return var(std::uniform_int_distribution<int>(0, dim_ - 1)(rng_));
            case 1: return Expr(std::round(std::uniform_real_distribution<double>(-3.0, 3.0)(rng_) * 4.0) / 4.0);
            case 2: return (*this)(depth - 1) + (*this)(depth - 1);
            case 3: return (*this)(depth - 1) - (*this)(depth - 1);
            case 4: return (*this)(depth - 1) * (*this)(depth - 1);
            case 5: return (*this)(depth - 1) / (Expr(1.0) + pow((*this)(depth - 1), 2));
            case 6: return pow((*this)(depth - 1), std::uniform_int_distribution<unsigned>(0, 4)(rng_));
            case 7: return exp(sin((*this)(depth - 1)));
            case 8: return log(Expr(1.0) + pow((*this)(depth - 1), 2));
            case 9: return sin((*this)(depth - 1));
            case 10: return cos((*this)(depth - 1));
            default: return -(*this)(depth - 1);
        }
    }

    std::vector<double> point(double lo = -2.0, double hi = 2.0) {
        std::uniform_real_distribution<double> u(lo, hi);
        std::vector<double> x(static_cast<std::size_t>(dim_));
        for (auto& v : x) v = u(rng_);
        return x;
    }

    std::mt19937_64& rng() { return rng_; }

private:
    int dim_;
    std::mt19937_64 rng_;
};

}  // namespace clbf::testing
