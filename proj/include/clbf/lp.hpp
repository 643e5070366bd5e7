// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small dense linear programs: min c^T x subject to A x <= b, x >= 0, by the
// two-phase tableau simplex with Bland's rule. Sized for the handful of
// variables that appear in input-feasibility checks.

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace clbf {

struct LpResult {
    enum class Status { Optimal, Infeasible, Unbounded } status = Status::Infeasible;
    double value = 0.0;
    Eigen::VectorXd x;
};

namespace detail {

class Tableau {
public:
    static constexpr double kEps = 1e-12;

    Tableau(Eigen::MatrixXd t, std::vector<int> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

    // Optimizes the objective stored in the last row over the first `ncols`
    // columns. Returns false when unbounded.
    bool optimize(int ncols) {
        const int rows = static_cast<int>(t_.rows()) - 1;
        const int rhs = static_cast<int>(t_.cols()) - 1;
        for (int iter = 0; iter < 10000; ++iter) {
            int enter = -1;
            for (int j = 0; j < ncols; ++j) {
                if (t_(rows, j) < -kEps) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < rows; ++i) {
                if (t_(i, enter) > kEps) {
                    const double ratio = t_(i, rhs) / t_(i, enter);
                    if (ratio < best - kEps || (ratio <= best + kEps && leave >= 0 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        return true;
    }

    void pivot(int r, int c) {
        t_.row(r) /= t_(r, c);
        for (int i = 0; i < t_.rows(); ++i) {
            if (i != r && t_(i, c) != 0.0) t_.row(i) -= t_(i, c) * t_.row(r);
        }
        basis_[static_cast<std::size_t>(r)] = c;
    }

    Eigen::MatrixXd& table() { return t_; }
    std::vector<int>& basis() { return basis_; }

private:
    Eigen::MatrixXd t_;
    std::vector<int> basis_;
};

}  // namespace detail

/// min c^T x subject to A x <= b, x >= 0.
inline LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    // Columns: x (n), slacks (m), artificials (m), rhs.
    const int ncol = n + 2 * m;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, ncol + 1);
    std::vector<int> basis(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double s = b(i) < 0.0 ? -1.0 : 1.0;
        t.row(i).head(n) = s * A.row(i);
        t(i, n + i) = s;
        t(i, ncol) = s * b(i);
        if (s > 0.0) {
            basis[static_cast<std::size_t>(i)] = n + i;
        } else {
            t(i, n + m + i) = 1.0;
            basis[static_cast<std::size_t>(i)] = n + m + i;
        }
    }
    // Phase 1: minimize the sum of artificials.
    for (int i = 0; i < m; ++i) {
        if (basis[static_cast<std::size_t>(i)] >= n + m) t.row(m) -= t.row(i);
    }
    for (int i = 0; i < m; ++i) t(m, n + m + i) = 0.0;
    detail::Tableau tab(std::move(t), std::move(basis));
    tab.optimize(n + m);
    auto& T = tab.table();
    LpResult res;
    if (-T(m, ncol) > 1e-9) {
        res.status = LpResult::Status::Infeasible;
        return res;
    }
    // Drive remaining artificials out of the basis.
    for (int i = 0; i < m; ++i) {
        if (tab.basis()[static_cast<std::size_t>(i)] >= n + m) {
            for (int j = 0; j < n + m; ++j) {
                if (std::abs(T(i, j)) > detail::Tableau::kEps) {
                    tab.pivot(i, j);
                    break;
                }
            }
        }
    }
    // Phase 2 objective.
    T.row(m).setZero();
    T.row(m).head(n) = c.transpose();
    for (int i = 0; i < m; ++i) {
        const int bi = tab.basis()[static_cast<std::size_t>(i)];
        if (bi < n + m && T(m, bi) != 0.0) T.row(m) -= T(m, bi) * T.row(i);
    }
    if (!tab.optimize(n + m)) {
        res.status = LpResult::Status::Unbounded;
        res.value = -std::numeric_limits<double>::infinity();
        return res;
    }
    res.status = LpResult::Status::Optimal;
    res.value = -T(m, ncol);
    res.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) {
        const int bi = tab.basis()[static_cast<std::size_t>(i)];
        if (bi < n) res.x(bi) = T(i, ncol);
    }
    return res;
}

/// Whether some u satisfies A u < b componentwise: minimizes s subject to
/// A u - b <= s 1 over free u and s >= -1; feasible iff the optimum is negative.
inline bool farkas_feasible(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    const int rows = static_cast<int>(A.rows());
    const int m = static_cast<int>(A.cols());
    // Variables: u+ (m), u- (m), s' = s + 1 >= 0.
    Eigen::MatrixXd M(rows, 2 * m + 1);
    M.leftCols(m) = A;
    M.middleCols(m, m) = -A;
    M.col(2 * m).setConstant(-1.0);
    const Eigen::VectorXd rhs = b - Eigen::VectorXd::Ones(rows);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * m + 1);
    c(2 * m) = 1.0;
    const LpResult r = solve_lp(M, rhs, c);
    if (r.status != LpResult::Status::Optimal) return r.status == LpResult::Status::Unbounded;
    return r.value - 1.0 < -1e-9;
}

}  // namespace clbf
