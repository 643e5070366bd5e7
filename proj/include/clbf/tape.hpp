// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Linearized evaluation program for a set of expressions.
//
// Structurally equal subtrees are merged, so the derivative-heavy verifier
// goals (which repeat the constraint terms many times) evaluate each distinct
// subterm once. The same program evaluates in double or in interval
// arithmetic, and supports forward-backward (HC4-revise) contraction of a box
// against ranges imposed on its outputs.

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "clbf/errors.hpp"
#include "clbf/expr.hpp"
#include "clbf/interval.hpp"

namespace clbf {

namespace tape_ops {

inline double f_div(double a, double b) {
    if (b == 0.0) throw DomainError("division by zero");
    return a / b;
}
inline double f_log(double a) {
    if (!(a > 0.0)) throw DomainError("log of a non-positive value");
    return std::log(a);
}
inline double f_exp(double a) { return std::exp(a); }
inline double f_sin(double a) { return std::sin(a); }
inline double f_cos(double a) { return std::cos(a); }
inline double f_pow(double a, unsigned k) { return detail::ipow(a, k); }
inline double f_lse(double tau, std::span<const double> a) { return lse_value(tau, a); }
inline double f_softmax(std::size_t i, double tau, std::span<const double> a) {
    return softmax_weight_value(i, tau, a);
}

inline Interval f_div(const Interval& a, const Interval& b) { return a / b; }
inline Interval f_log(const Interval& a) { return log(a); }
inline Interval f_exp(const Interval& a) { return exp(a); }
inline Interval f_sin(const Interval& a) { return sin(a); }
inline Interval f_cos(const Interval& a) { return cos(a); }
inline Interval f_pow(const Interval& a, unsigned k) { return pow(a, k); }
inline Interval f_lse(double tau, std::span<const Interval> a) { return lse(tau, a); }
inline Interval f_softmax(std::size_t i, double tau, std::span<const Interval> a) {
    return softmax_weight(i, tau, a);
}

// Outward-rounded k-th root of a non-negative value.
inline double root_down(double v, unsigned k) {
    if (v <= 0.0) return 0.0;
    return std::max(0.0, detail::down(std::pow(v, 1.0 / k), 64.0));
}
inline double root_up(double v, unsigned k) {
    if (v <= 0.0) return 0.0;
    if (v == detail::kInf) return v;
    return detail::up(std::pow(v, 1.0 / k), 64.0);
}

}  // namespace tape_ops

class Tape {
public:
    struct Instr {
        Op op = Op::Const;
        double value = 0.0;
        int index = 0;
        std::uint32_t a = 0;
        std::uint32_t b = 0;
        std::uint32_t first = 0;  // n-ary operands in operands_[first, first + count)
        std::uint32_t count = 0;
    };

    Tape() = default;

    Tape(std::span<const Expr> outputs, std::size_t dim) : dim_(dim) {
        std::unordered_map<const Node*, std::uint32_t> by_ptr;
        std::unordered_multimap<std::size_t, std::pair<Expr, std::uint32_t>> by_hash;
        for (const auto& e : outputs) outputs_.push_back(emit(e, by_ptr, by_hash));
    }

    Tape(std::initializer_list<Expr> outputs, std::size_t dim)
        : Tape(std::span<const Expr>(outputs.begin(), outputs.size()), dim) {}

    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] std::size_t size() const { return code_.size(); }
    [[nodiscard]] std::size_t num_outputs() const { return outputs_.size(); }
    [[nodiscard]] std::uint32_t output_slot(std::size_t k) const { return outputs_[k]; }

    /// Evaluates every instruction; `slots` is resized to size().
    template <class T>
    void forward(std::span<const T> x, std::vector<T>& slots) const {
        using namespace tape_ops;
        slots.resize(code_.size());
        T buf[64];
        std::vector<T> big;
        for (std::size_t i = 0; i < code_.size(); ++i) {
            const Instr& in = code_[i];
            T& r = slots[i];
            switch (in.op) {
                case Op::Var: r = x[static_cast<std::size_t>(in.index)]; break;
                case Op::Const: r = T(in.value); break;
                case Op::Neg: r = -slots[in.a]; break;
                case Op::Add: r = slots[in.a] + slots[in.b]; break;
                case Op::Sub: r = slots[in.a] - slots[in.b]; break;
                case Op::Mul: r = slots[in.a] * slots[in.b]; break;
                case Op::Div: r = f_div(slots[in.a], slots[in.b]); break;
                case Op::Pow: r = f_pow(slots[in.a], static_cast<unsigned>(in.index)); break;
                case Op::Exp: r = f_exp(slots[in.a]); break;
                case Op::Log: r = f_log(slots[in.a]); break;
                case Op::Sin: r = f_sin(slots[in.a]); break;
                case Op::Cos: r = f_cos(slots[in.a]); break;
                case Op::Lse:
                case Op::Softmax: {
                    T* args = buf;
                    if (in.count > 64) {
                        big.resize(in.count);
                        args = big.data();
                    }
                    for (std::uint32_t k = 0; k < in.count; ++k) args[k] = slots[operands_[in.first + k]];
                    const std::span<const T> view(args, in.count);
                    r = in.op == Op::Lse ? f_lse(in.value, view)
                                         : f_softmax(static_cast<std::size_t>(in.index), in.value, view);
                    break;
                }
            }
        }
    }

    [[nodiscard]] std::vector<double> eval(std::span<const double> x) const {
        std::vector<double> slots;
        forward<double>(x, slots);
        std::vector<double> out(outputs_.size());
        for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = slots[outputs_[k]];
        return out;
    }

    [[nodiscard]] std::vector<Interval> eval(const IntervalBox& box) const {
        std::vector<Interval> slots;
        forward<Interval>(box.dims(), slots);
        std::vector<Interval> out(outputs_.size());
        for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = slots[outputs_[k]];
        return out;
    }

    /// Forward-backward contraction. Narrows `box` so that it still contains
    /// every point whose outputs lie in `ranges` (entire() leaves an output
    /// unconstrained). Returns false when the constraints are infeasible on
    /// the box. `slots` holds the forward enclosures afterwards (before
    /// narrowing).
    bool contract(IntervalBox& box, std::span<const Interval> ranges, std::vector<Interval>& slots,
                  std::vector<Interval>& forward_copy) const {
        forward<Interval>(box.dims(), slots);
        forward_copy = slots;
        for (std::size_t k = 0; k < outputs_.size(); ++k) {
            Interval& s = slots[outputs_[k]];
            s = intersect(s, ranges[k]);
            if (s.is_empty()) return false;
        }
        for (std::size_t i = code_.size(); i-- > 0;) {
            const Instr& in = code_[i];
            const Interval z = slots[i];
            if (z.is_empty()) return false;
            auto narrow = [&](std::uint32_t slot, const Interval& with) {
                slots[slot] = intersect(slots[slot], with);
                return !slots[slot].is_empty();
            };
            switch (in.op) {
                case Op::Var: {
                    Interval& d = box[static_cast<std::size_t>(in.index)];
                    d = intersect(d, z);
                    if (d.is_empty()) return false;
                    break;
                }
                case Op::Const:
                    if (!z.contains(in.value)) return false;
                    break;
                case Op::Neg:
                    if (!narrow(in.a, -z)) return false;
                    break;
                case Op::Add:
                    if (!narrow(in.a, z - slots[in.b])) return false;
                    if (!narrow(in.b, z - slots[in.a])) return false;
                    break;
                case Op::Sub:
                    if (!narrow(in.a, z + slots[in.b])) return false;
                    if (!narrow(in.b, slots[in.a] - z)) return false;
                    break;
                case Op::Mul: {
                    const Interval& b = slots[in.b];
                    if (b.lo > 0.0 || b.hi < 0.0) {
                        if (!narrow(in.a, z / b)) return false;
                    }
                    const Interval& a = slots[in.a];
                    if (a.lo > 0.0 || a.hi < 0.0) {
                        if (!narrow(in.b, z / a)) return false;
                    }
                    break;
                }
                case Op::Div: {
                    if (!narrow(in.a, z * slots[in.b])) return false;
                    if (z.lo > 0.0 || z.hi < 0.0) {
                        if (!narrow(in.b, slots[in.a] / z)) return false;
                    }
                    break;
                }
                case Op::Pow: {
                    const auto k = static_cast<unsigned>(in.index);
                    if (k % 2 == 1) {
                        const double lo = z.lo >= 0.0 ? tape_ops::root_down(z.lo, k) : -tape_ops::root_up(-z.lo, k);
                        const double hi = z.hi >= 0.0 ? tape_ops::root_up(z.hi, k) : -tape_ops::root_down(-z.hi, k);
                        if (!narrow(in.a, Interval{lo, hi})) return false;
                    } else {
                        if (z.hi < 0.0) return false;
                        const double r = tape_ops::root_up(z.hi, k);
                        if (!narrow(in.a, Interval{-r, r})) return false;
                        if (z.lo > 0.0) {
                            const double rl = tape_ops::root_down(z.lo, k);
                            const Interval& a = slots[in.a];
                            const Interval neg = intersect(a, Interval{-detail::kInf, -rl});
                            const Interval pos = intersect(a, Interval{rl, detail::kInf});
                            const Interval h = hull(neg, pos);
                            if (h.is_empty()) return false;
                            slots[in.a] = h;
                        }
                    }
                    break;
                }
                case Op::Exp: {
                    if (z.hi <= 0.0) return false;
                    const double lo = z.lo > 0.0 ? detail::down(std::log(z.lo)) : -detail::kInf;
                    if (!narrow(in.a, Interval{lo, detail::up(std::log(z.hi))})) return false;
                    break;
                }
                case Op::Log:
                    if (!narrow(in.a, exp(z))) return false;
                    break;
                case Op::Sin:
                case Op::Cos:
                case Op::Lse:
                case Op::Softmax: break;
            }
        }
        return true;
    }

private:
    std::uint32_t emit(const Expr& e, std::unordered_map<const Node*, std::uint32_t>& by_ptr,
                       std::unordered_multimap<std::size_t, std::pair<Expr, std::uint32_t>>& by_hash) {
        if (auto it = by_ptr.find(e.get()); it != by_ptr.end()) return it->second;
        auto range = by_hash.equal_range(e.hash());
        for (auto it = range.first; it != range.second; ++it) {
            if (it->second.first == e) {
                by_ptr.emplace(e.get(), it->second.second);
                return it->second.second;
            }
        }
        Instr in;
        in.op = e.op();
        in.value = e.value();
        in.index = e.index();
        if (e.op() == Op::Var && (e.index() < 0 || static_cast<std::size_t>(e.index()) >= dim_)) {
            throw std::out_of_range("tape: variable x" + std::to_string(e.index() + 1) + " outside dimension " +
                                    std::to_string(dim_));
        }
        if (e.op() == Op::Lse || e.op() == Op::Softmax) {
            std::vector<std::uint32_t> ops;
            ops.reserve(e.args().size());
            for (const auto& a : e.args()) ops.push_back(emit(a, by_ptr, by_hash));
            in.first = static_cast<std::uint32_t>(operands_.size());
            in.count = static_cast<std::uint32_t>(ops.size());
            operands_.insert(operands_.end(), ops.begin(), ops.end());
        } else {
            if (!e.args().empty()) in.a = emit(e.arg(0), by_ptr, by_hash);
            if (e.args().size() > 1) in.b = emit(e.arg(1), by_ptr, by_hash);
        }
        const auto slot = static_cast<std::uint32_t>(code_.size());
        code_.push_back(in);
        by_ptr.emplace(e.get(), slot);
        by_hash.emplace(e.hash(), std::make_pair(e, slot));
        return slot;
    }

    std::size_t dim_ = 0;
    std::vector<Instr> code_;
    std::vector<std::uint32_t> operands_;
    std::vector<std::uint32_t> outputs_;
};

/// Sound enclosure of e over the box. Throws DomainError when a log argument
/// or a denominator enclosure touches zero.
inline Interval eval_interval(const Expr& e, const IntervalBox& box) {
    const Tape t({e}, box.size());
    return t.eval(box)[0];
}

}  // namespace clbf
