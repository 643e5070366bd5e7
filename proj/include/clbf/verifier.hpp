// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Delta-complete branch-and-prune checker for implications
//
//     (e_k(x) = 0 for all k) and (lo_j <= c_j(x) <= hi_j for all j)
//         ==> goal(x) < 0        for all x in a box.
//
// Verified means no point of the box satisfies the exact premises while
// violating the goal: pruning only uses sound enclosures of the undisturbed
// premises and of {goal >= 0}. Counterexample means a point satisfying the
// premises up to delta with goal >= -delta was found.
//
// Search order is canonical: breadth-first expansion of the root into a fixed
// number of frontier boxes, then an independent depth-first search of each
// frontier box (lower half first). Worker threads only change which frontier
// boxes are searched concurrently; the reported verdict and witness are those
// of the sequential order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include "clbf/digest.hpp"
#include "clbf/errors.hpp"
#include "clbf/expr.hpp"
#include "clbf/interval.hpp"
#include "clbf/parse.hpp"
#include "clbf/tape.hpp"

namespace clbf {

struct IntervalConstraint {
    Expr expr;
    double lo = 0.0;
    double hi = 0.0;
};

struct Query {
    IntervalBox box;
    std::vector<Expr> equalities;
    std::vector<IntervalConstraint> intervals;
    Expr goal;
    double delta = 1e-4;
    double min_box_width = 1e-5;
    std::uint64_t budget = 5'000'000;

    void validate() const {
        if (!(delta > 0.0)) throw std::invalid_argument("query: delta must be positive");
        if (!(min_box_width > 0.0)) throw std::invalid_argument("query: min_box_width must be positive");
        if (box.size() == 0 || box.is_empty()) throw std::invalid_argument("query: empty box");
        for (const auto& d : box.dims()) {
            if (!d.is_finite() || d.lo > d.hi) throw std::invalid_argument("query: box must be finite and ordered");
        }
        const int n = static_cast<int>(box.size());
        auto check_dim = [n](const Expr& e) {
            if (max_variable_index(e) >= n) throw std::invalid_argument("query: expression exceeds box dimension");
        };
        for (const auto& e : equalities) check_dim(e);
        for (const auto& c : intervals) {
            check_dim(c.expr);
            if (!(c.lo <= c.hi)) throw std::invalid_argument("query: interval constraint with lo > hi");
        }
        check_dim(goal);
    }

    /// Fingerprint of the printed query.
    [[nodiscard]] std::string digest() const {
        std::ostringstream os;
        os.precision(17);
        os << box << '|';
        for (const auto& e : equalities) os << to_string(e) << "=0;";
        for (const auto& c : intervals) os << to_string(c.expr) << " in [" << c.lo << ',' << c.hi << "];";
        os << "goal:" << to_string(goal) << "<0|" << delta << '|' << min_box_width;
        return fnv1a_hex(os.str());
    }
};

enum class WorkOrder { DepthFirst, BreadthFirst };

struct CheckOptions {
    unsigned threads = 1;
    bool trace = false;
    WorkOrder order = WorkOrder::DepthFirst;
    /// Forward-backward contraction of each box before the enclosure tests.
    bool contract = true;
    /// Number of breadth-first boxes handed to the depth-first phase.
    std::size_t frontier = 64;
};

struct VerdictVerified {
    std::string digest;
    double delta = 0.0;
    std::uint64_t boxes = 0;
    double seconds = 0.0;
};

struct VerdictCounterexample {
    std::vector<double> point;
    std::vector<double> equality_residuals;
    std::vector<double> interval_values;
    double goal_value = 0.0;
    std::uint64_t boxes = 0;
    double seconds = 0.0;
};

using Verdict = std::variant<VerdictVerified, VerdictCounterexample>;

inline bool is_verified(const Verdict& v) { return std::holds_alternative<VerdictVerified>(v); }

enum class PruneStatus { Pruned, Undecided, CandidateCounterexample };

struct PruneResult {
    PruneStatus status = PruneStatus::Undecided;
    std::vector<double> point;
};

class CompiledQuery {
public:
    explicit CompiledQuery(Query q) : q_(std::move(q)) {
        q_.validate();
        std::vector<Expr> outs = q_.equalities;
        for (const auto& c : q_.intervals) outs.push_back(c.expr);
        outs.push_back(q_.goal);
        tape_ = Tape(outs, q_.box.size());
        for (std::size_t k = 0; k < q_.equalities.size(); ++k) ranges_.emplace_back(0.0);
        for (const auto& c : q_.intervals) ranges_.emplace_back(c.lo, c.hi);
        ranges_.emplace_back(0.0, detail::kInf);  // violation of the goal
    }

    [[nodiscard]] const Query& query() const { return q_; }
    [[nodiscard]] const Tape& tape() const { return tape_; }

    /// Enclosure test on a box with the midpoint candidate check.
    [[nodiscard]] PruneResult prune(const IntervalBox& box) const {
        const auto enc = tape_.eval(box);
        const std::size_t ne = q_.equalities.size();
        const std::size_t ni = q_.intervals.size();
        for (std::size_t k = 0; k < ne + ni; ++k) {
            if (intersect(enc[k], ranges_[k]).is_empty()) return {PruneStatus::Pruned, {}};
        }
        if (enc[ne + ni].hi < 0.0) return {PruneStatus::Pruned, {}};
        auto mid = box.midpoint();
        if (witness_at(mid)) return {PruneStatus::CandidateCounterexample, std::move(mid)};
        return {PruneStatus::Undecided, {}};
    }

    /// Delta-weakened premises and goal >= -delta at x, with residuals.
    [[nodiscard]] std::optional<VerdictCounterexample> witness_at(std::span<const double> x) const {
        if (!q_.box.contains(x)) return std::nullopt;
        std::vector<double> v;
        try {
            v = tape_.eval(x);
        } catch (const DomainError&) {
            return std::nullopt;
        }
        const double d = q_.delta;
        const std::size_t ne = q_.equalities.size();
        const std::size_t ni = q_.intervals.size();
        VerdictCounterexample c;
        for (std::size_t k = 0; k < ne; ++k) {
            if (!(std::abs(v[k]) <= d)) return std::nullopt;
            c.equality_residuals.push_back(v[k]);
        }
        for (std::size_t k = 0; k < ni; ++k) {
            const auto& ic = q_.intervals[k];
            const double val = v[ne + k];
            if (!(val >= ic.lo - d && val <= ic.hi + d)) return std::nullopt;
            c.interval_values.push_back(val);
        }
        c.goal_value = v[ne + ni];
        if (!(c.goal_value >= -d)) return std::nullopt;
        c.point.assign(x.begin(), x.end());
        return c;
    }

    /// Contracts the box against the premises and {goal >= 0}. Returns false
    /// when no such point can lie in the box.
    bool contract(IntervalBox& box, std::vector<Interval>& slots, std::vector<Interval>& fwd) const {
        for (int pass = 0; pass < 4; ++pass) {
            const IntervalBox before = box;
            if (!tape_.contract(box, ranges_, slots, fwd)) return false;
            double shrink = 0.0;
            for (std::size_t i = 0; i < box.size(); ++i) {
                const double w = before[i].width();
                if (w > 0.0) shrink = std::max(shrink, 1.0 - box[i].width() / w);
            }
            if (shrink < 0.1) break;
        }
        return true;
    }

private:
    Query q_;
    Tape tape_;
    std::vector<Interval> ranges_;
};

inline PruneResult prune(const Query& q, const IntervalBox& box) { return CompiledQuery(q).prune(box); }

namespace detail {

struct SearchOutcome {
    enum class Kind { Done, Counterexample, Exhausted, Cancelled } kind = Kind::Done;
    std::uint64_t boxes = 0;
    std::uint64_t unresolved = 0;
    std::optional<VerdictCounterexample> witness;
};

class Searcher {
public:
    Searcher(const CompiledQuery& cq, const CheckOptions& opts, std::atomic<std::uint64_t>& global)
        : cq_(cq), opts_(opts), global_(global) {}

    enum class Step { Pruned, Witness, Leaf, Split };

    // One branch-and-prune step. On Split, `children` receives the lower and
    // upper halves of the (contracted) box.
    Step step(IntervalBox& box, std::optional<VerdictCounterexample>& witness, std::pair<IntervalBox, IntervalBox>& children) {
        tick();
        if (opts_.contract) {
            if (!cq_.contract(box, slots_, fwd_)) return Step::Pruned;
        } else if (cq_.prune(box).status == PruneStatus::Pruned) {
            return Step::Pruned;
        }
        if ((witness = cq_.witness_at(box.midpoint()))) return Step::Witness;
        if (box.width() <= cq_.query().min_box_width) {
            if ((witness = leaf_search(box))) return Step::Witness;
            return Step::Leaf;
        }
        children = split(box);
        return Step::Split;
    }

    SearchOutcome run(IntervalBox root, std::uint64_t cap, const std::atomic<std::size_t>* cancel_below,
                      std::size_t index) {
        SearchOutcome out;
        std::deque<std::pair<IntervalBox, unsigned>> work;
        work.emplace_back(std::move(root), 0U);
        std::optional<VerdictCounterexample> witness;
        std::pair<IntervalBox, IntervalBox> children;
        while (!work.empty()) {
            if (cancel_below != nullptr && (out.boxes & 1023U) == 0 && cancel_below->load() < index) {
                out.kind = SearchOutcome::Kind::Cancelled;
                return out;
            }
            if (out.boxes >= cap) {
                out.kind = SearchOutcome::Kind::Exhausted;
                return out;
            }
            IntervalBox box;
            unsigned depth = 0;
            if (opts_.order == WorkOrder::DepthFirst) {
                std::tie(box, depth) = std::move(work.back());
                work.pop_back();
            } else {
                std::tie(box, depth) = std::move(work.front());
                work.pop_front();
            }
            max_depth_ = std::max(max_depth_, depth);
            frontier_ = work.size();
            ++out.boxes;
            switch (step(box, witness, children)) {
                case Step::Pruned: break;
                case Step::Witness:
                    out.kind = SearchOutcome::Kind::Counterexample;
                    out.witness = std::move(witness);
                    return out;
                case Step::Leaf: ++out.unresolved; break;
                case Step::Split:
                    if (opts_.order == WorkOrder::DepthFirst) {
                        work.emplace_back(std::move(children.second), depth + 1);
                        work.emplace_back(std::move(children.first), depth + 1);
                    } else {
                        work.emplace_back(std::move(children.first), depth + 1);
                        work.emplace_back(std::move(children.second), depth + 1);
                    }
                    break;
            }
        }
        return out;
    }

private:
    void tick() {
        const std::uint64_t n = global_.fetch_add(1) + 1;
        if (opts_.trace && n % 10000 == 0) {
            static std::mutex mu;
            std::lock_guard<std::mutex> lock(mu);
            std::cerr << "[verifier] explored=" << n << " max_depth=" << max_depth_ << " frontier=" << frontier_ << '\n';
        }
    }

    // Corners and midpoint of a minimum-width box.
    std::optional<VerdictCounterexample> leaf_search(const IntervalBox& box) const {
        const std::size_t n = box.size();
        if (n > 12) return std::nullopt;
        std::vector<double> p(n);
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
            for (std::size_t i = 0; i < n; ++i) p[i] = (mask >> i) & 1U ? box[i].hi : box[i].lo;
            if (auto w = cq_.witness_at(p)) return w;
        }
        return std::nullopt;
    }

    const CompiledQuery& cq_;
    const CheckOptions& opts_;
    std::atomic<std::uint64_t>& global_;
    std::vector<Interval> slots_;
    std::vector<Interval> fwd_;
    unsigned max_depth_ = 0;
    std::size_t frontier_ = 0;
};

}  // namespace detail

/// Runs the branch-and-prune search. Throws ResourceExhausted when the box
/// budget runs out, or when boxes at the minimum width stay undecided and no
/// counterexample exists elsewhere.
inline Verdict check(const CompiledQuery& cq, const CheckOptions& opts = {}) {
    using Kind = detail::SearchOutcome::Kind;
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    const Query& q = cq.query();
    std::atomic<std::uint64_t> global{0};

    // Breadth-first frontier.
    std::uint64_t boxes = 0;
    std::uint64_t unresolved = 0;
    std::deque<IntervalBox> frontier;
    frontier.push_back(q.box);
    {
        detail::Searcher s(cq, opts, global);
        std::optional<VerdictCounterexample> witness;
        std::pair<IntervalBox, IntervalBox> children;
        while (!frontier.empty() && frontier.size() < std::max<std::size_t>(opts.frontier, 1)) {
            if (boxes >= q.budget) throw ResourceExhausted("verifier box budget exhausted");
            IntervalBox box = std::move(frontier.front());
            frontier.pop_front();
            ++boxes;
            switch (s.step(box, witness, children)) {
                case detail::Searcher::Step::Pruned: break;
                case detail::Searcher::Step::Witness:
                    witness->boxes = boxes;
                    witness->seconds = elapsed();
                    return *witness;
                case detail::Searcher::Step::Leaf: ++unresolved; break;
                case detail::Searcher::Step::Split:
                    frontier.push_back(std::move(children.first));
                    frontier.push_back(std::move(children.second));
                    break;
            }
        }
    }

    // Depth-first search of each frontier box.
    const std::vector<IntervalBox> roots(frontier.begin(), frontier.end());
    std::vector<detail::SearchOutcome> results(roots.size());
    const std::uint64_t cap = q.budget - boxes;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> first_witness{std::numeric_limits<std::size_t>::max()};
    auto worker = [&] {
        detail::Searcher s(cq, opts, global);
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= roots.size()) return;
            if (first_witness.load() < i) {
                results[i].kind = Kind::Cancelled;
                continue;
            }
            results[i] = s.run(roots[i], cap, &first_witness, i);
            if (results[i].kind == Kind::Counterexample) {
                std::size_t cur = first_witness.load();
                while (i < cur && !first_witness.compare_exchange_weak(cur, i)) {
                }
            }
        }
    };
    const unsigned nthreads = std::max(1U, std::min<unsigned>(opts.threads, static_cast<unsigned>(roots.size())));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(nthreads);
        for (unsigned t = 0; t < nthreads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    worker();
                } catch (...) {
                    errors[t] = std::current_exception();
                    first_witness.store(0);
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    // Sequential-equivalent reduction.
    for (auto& r : results) {
        boxes += r.boxes;
        if (boxes > q.budget || r.kind == Kind::Exhausted) throw ResourceExhausted("verifier box budget exhausted");
        unresolved += r.unresolved;
        if (r.kind == Kind::Counterexample) {
            r.witness->boxes = boxes;
            r.witness->seconds = elapsed();
            return *r.witness;
        }
    }
    if (unresolved > 0) {
        throw ResourceExhausted("verifier: " + std::to_string(unresolved) +
                                " boxes at the minimum width stayed undecided without a delta-witness");
    }
    return VerdictVerified{q.digest(), q.delta, boxes, elapsed()};
}

inline Verdict check(const Query& q, const CheckOptions& opts = {}) { return check(CompiledQuery(q), opts); }

}  // namespace clbf
