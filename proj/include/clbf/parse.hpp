// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Infix syntax for expressions.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' INTEGER)?
//   primary := NUMBER | 'pi' | 'x' INDEX | func '(' args ')' | '(' expr ')'
//   func    := exp | log | sin | cos | lse | softmax
//
// Variables are 1-based in text (x1..xn) and 0-based in Expr. The smooth
// maximum prints as lse(tau, a1, ..., aN) and its weights as
// softmax(i, tau, a1, ..., aN) with a 1-based i. Printing emits the shortest
// round-trip decimal for constants, so parse(print(e)) == e.

#include <cctype>
#include <charconv>
#include <numbers>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "clbf/errors.hpp"
#include "clbf/expr.hpp"

namespace clbf {

namespace detail {

class Parser {
public:
    Parser(std::string_view text, int dim) : s_(text), dim_(dim) {}

    Expr parse() {
        Expr e = expr();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " at offset " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    Expr expr() {
        Expr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = lhs + term();
            } else if (accept('-')) {
                lhs = lhs - term();
            } else {
                return lhs;
            }
        }
    }

    Expr term() {
        Expr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = lhs * unary();
            } else if (accept('/')) {
                lhs = lhs / unary();
            } else {
                return lhs;
            }
        }
    }

    Expr unary() {
        if (accept('-')) return -unary();
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (accept('^')) {
            skip_ws();
            const long k = integer();
            if (k < 0) fail("exponent must be a non-negative integer");
            base = pow(base, static_cast<unsigned>(k));
        }
        return base;
    }

    long integer() {
        skip_ws();
        long v = 0;
        const auto* begin = s_.data() + pos_;
        const auto [ptr, ec] = std::from_chars(begin, s_.data() + s_.size(), v);
        if (ec != std::errc{} || ptr == begin) fail("expected an integer");
        pos_ += static_cast<std::size_t>(ptr - begin);
        return v;
    }

    double number() {
        skip_ws();
        double v = 0.0;
        const auto* begin = s_.data() + pos_;
        const auto [ptr, ec] = std::from_chars(begin, s_.data() + s_.size(), v);
        if (ec != std::errc{} || ptr == begin) fail("expected a number");
        pos_ += static_cast<std::size_t>(ptr - begin);
        return v;
    }

    std::string identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    std::vector<Expr> arguments() {
        std::vector<Expr> out;
        expect('(');
        out.push_back(expr());
        while (accept(',')) out.push_back(expr());
        expect(')');
        return out;
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr(number());
        if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected character");

        const std::size_t start = pos_;
        const std::string id = identifier();
        if (id == "x" && pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
            const long k = integer();
            if (k < 1 || (dim_ > 0 && k > dim_)) {
                pos_ = start;
                fail("variable index out of range");
            }
            return var(static_cast<int>(k - 1));
        }
        if (id == "pi") return Expr(std::numbers::pi);
        if (id == "exp" || id == "log" || id == "sin" || id == "cos") {
            const auto a = arguments();
            if (a.size() != 1) fail(id + " takes one argument");
            if (id == "exp") return exp(a[0]);
            if (id == "log") return log(a[0]);
            if (id == "sin") return sin(a[0]);
            return cos(a[0]);
        }
        if (id == "lse") {
            auto a = arguments();
            if (a.size() < 2 || !a[0].is_constant() || !(a[0].value() > 0.0)) {
                fail("lse(tau, a1, ...) needs a positive constant tau and at least one term");
            }
            const double tau = a[0].value();
            a.erase(a.begin());
            return lse(tau, std::move(a));
        }
        if (id == "softmax") {
            auto a = arguments();
            if (a.size() < 3 || !a[0].is_constant() || !a[1].is_constant() || !(a[1].value() > 0.0)) {
                fail("softmax(i, tau, a1, ...) needs a constant index, a positive tau and terms");
            }
            const double idx = a[0].value();
            const double tau = a[1].value();
            a.erase(a.begin(), a.begin() + 2);
            if (idx != std::floor(idx) || idx < 1 || idx > static_cast<double>(a.size())) {
                fail("softmax index out of range");
            }
            return softmax_weight(static_cast<int>(idx) - 1, tau, std::move(a));
        }
        pos_ = start;
        fail("unknown identifier '" + id + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int dim_ = 0;
};

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

// Binding strength used to decide parenthesization.
inline int precedence(const Expr& e) {
    switch (e.op()) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        case Op::Const: return e.value() < 0.0 ? 3 : 5;
        default: return 5;
    }
}

inline void print_to(const Expr& e, std::string& out);

inline void print_wrapped(const Expr& e, bool wrap, std::string& out) {
    if (wrap) out += '(';
    print_to(e, out);
    if (wrap) out += ')';
}

inline void print_args(const Expr& e, std::string& out) {
    for (const auto& a : e.args()) {
        out += ", ";
        print_to(a, out);
    }
    out += ')';
}

inline void print_to(const Expr& e, std::string& out) {
    switch (e.op()) {
        case Op::Const: out += format_double(e.value()); return;
        case Op::Var: out += "x" + std::to_string(e.index() + 1); return;
        case Op::Neg:
            out += '-';
            print_wrapped(e.arg(0), precedence(e.arg(0)) < 4, out);
            return;
        case Op::Add:
        case Op::Sub:
            print_to(e.arg(0), out);
            out += e.op() == Op::Add ? " + " : " - ";
            print_wrapped(e.arg(1), precedence(e.arg(1)) <= 1 || precedence(e.arg(1)) == 3, out);
            return;
        case Op::Mul:
        case Op::Div:
            print_wrapped(e.arg(0), precedence(e.arg(0)) <= 1, out);
            out += e.op() == Op::Mul ? " * " : " / ";
            print_wrapped(e.arg(1), precedence(e.arg(1)) <= 3, out);
            return;
        case Op::Pow:
            print_wrapped(e.arg(0), precedence(e.arg(0)) <= 4, out);
            out += '^' + std::to_string(e.index());
            return;
        case Op::Exp:
        case Op::Log:
        case Op::Sin:
        case Op::Cos: {
            static constexpr const char* names[] = {"exp(", "log(", "sin(", "cos("};
            out += names[static_cast<int>(e.op()) - static_cast<int>(Op::Exp)];
            print_to(e.arg(0), out);
            out += ')';
            return;
        }
        case Op::Lse:
            out += "lse(" + format_double(e.value());
            print_args(e, out);
            return;
        case Op::Softmax:
            out += "softmax(" + std::to_string(e.index() + 1) + ", " + format_double(e.value());
            print_args(e, out);
            return;
    }
}

}  // namespace detail

/// Parses infix text. `dim` > 0 bounds the variable indices to x1..x_dim.
inline Expr parse_expr(std::string_view text, int dim = 0) { return detail::Parser(text, dim).parse(); }

inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print_to(e, out);
    return out;
}

/// Parses a closed expression (e.g. "-pi", "1710/57.9") to its value.
inline double parse_constant(std::string_view text) {
    const Expr e = parse_expr(text, 0);
    if (!e.is_constant()) throw ParseError("expected a constant expression: '" + std::string(text) + "'");
    return e.value();
}

}  // namespace clbf
