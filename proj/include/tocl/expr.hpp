#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tocl/polynomial.hpp"
#include "tocl/rational.hpp"

namespace tocl {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what + " (at offset " + std::to_string(position) + ")"),
          position(position) {}
    std::size_t position;
};

/// Thrown when evaluation hits a vanishing denominator.
class SingularEvaluation : public std::runtime_error {
public:
    explicit SingularEvaluation(const std::string& subexpr)
        : std::runtime_error("singular evaluation: zero denominator in '" + subexpr + "'"),
          subexpr(subexpr) {}
    std::string subexpr;
};

enum class NodeKind { Constant, Variable, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp };

/// Immutable expression tree over t, x1..xn with exact rational constants.
/// Variable index 0 is t; index i >= 1 is x_i.
class Expr {
    struct Node {
        NodeKind kind;
        Rat value;       // Constant
        int var = 0;     // Variable
        long exponent = 0;  // Pow (integer exponent)
        std::shared_ptr<const Node> a, b;
    };
    std::shared_ptr<const Node> node_;

    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    static Expr make(NodeKind k, Expr a = Expr(), Expr b = Expr()) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->a = a.node_;
        n->b = b.node_;
        return Expr(std::move(n));
    }

public:
    Expr() = default;

    bool valid() const { return node_ != nullptr; }
    NodeKind kind() const { return node_->kind; }
    const Rat& value() const { return node_->value; }
    int var_index() const { return node_->var; }
    long pow_exponent() const { return node_->exponent; }
    Expr child_a() const { return Expr(node_->a); }
    Expr child_b() const { return Expr(node_->b); }

    static Expr constant(Rat c) {
        auto n = std::make_shared<Node>();
        n->kind = NodeKind::Constant;
        n->value = std::move(c);
        return Expr(std::move(n));
    }
    static Expr constant(long c) { return constant(Rat(c)); }

    static Expr variable(int index) {
        auto n = std::make_shared<Node>();
        n->kind = NodeKind::Variable;
        n->var = index;
        return Expr(std::move(n));
    }
    static Expr t() { return variable(0); }
    static Expr x(int i) { return variable(i); }

    static Expr add(Expr a, Expr b) { return make(NodeKind::Add, a, b); }
    static Expr sub(Expr a, Expr b) { return make(NodeKind::Sub, a, b); }

    static Expr mul(Expr a, Expr b) { return make(NodeKind::Mul, a, b); }

    // constant/constant folds eagerly so rational literals stay exact scalars
    static Expr div(Expr a, Expr b) {
        if (a.kind_is(NodeKind::Constant) && b.kind_is(NodeKind::Constant) &&
            !b.value().is_zero())
            return constant(a.value() / b.value());
        return make(NodeKind::Div, a, b);
    }

    static Expr neg(Expr a) {
        if (a.kind_is(NodeKind::Constant)) return constant(-a.value());
        return make(NodeKind::Neg, a);
    }

    static Expr pow(Expr a, long e) {
        Expr r = make(NodeKind::Pow, a);
        const_cast<Node*>(r.node_.get())->exponent = e;
        return r;
    }

    static Expr sin(Expr a) { return make(NodeKind::Sin, a); }
    static Expr cos(Expr a) { return make(NodeKind::Cos, a); }
    static Expr exp(Expr a) { return make(NodeKind::Exp, a); }

    friend Expr operator+(const Expr& a, const Expr& b) { return add(a, b); }
    friend Expr operator-(const Expr& a, const Expr& b) { return sub(a, b); }
    friend Expr operator*(const Expr& a, const Expr& b) { return mul(a, b); }
    friend Expr operator/(const Expr& a, const Expr& b) { return div(a, b); }
    friend Expr operator-(const Expr& a) { return neg(a); }

    bool kind_is(NodeKind k) const { return node_ && node_->kind == k; }

    bool is_constant(const Rat& c) const {
        return kind_is(NodeKind::Constant) && node_->value == c;
    }
    bool is_zero_constant() const { return is_constant(Rat(0)); }

    std::size_t node_count() const {
        if (!node_) return 0;
        std::size_t c = 1;
        if (node_->a) c += Expr(node_->a).node_count();
        if (node_->b) c += Expr(node_->b).node_count();
        return c;
    }

    friend bool struct_equal(const Expr& a, const Expr& b) {
        if (a.node_ == b.node_) return true;
        if (!a.node_ || !b.node_) return false;
        if (a.node_->kind != b.node_->kind) return false;
        switch (a.node_->kind) {
            case NodeKind::Constant: return a.node_->value == b.node_->value;
            case NodeKind::Variable: return a.node_->var == b.node_->var;
            case NodeKind::Pow:
                return a.node_->exponent == b.node_->exponent &&
                       struct_equal(a.child_a(), b.child_a());
            default:
                if ((a.node_->a != nullptr) != (b.node_->a != nullptr)) return false;
                if ((a.node_->b != nullptr) != (b.node_->b != nullptr)) return false;
                if (a.node_->a && !struct_equal(a.child_a(), b.child_a())) return false;
                if (a.node_->b && !struct_equal(a.child_b(), b.child_b())) return false;
                return true;
        }
    }
};

using VecExpr = std::vector<Expr>;

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

std::string print_expr(const Expr& e);

inline double evaluate(const Expr& e, double t, std::span<const double> x) {
    switch (e.kind()) {
        case NodeKind::Constant: return to_double(e.value());
        case NodeKind::Variable: {
            int v = e.var_index();
            if (v == 0) return t;
            if (v < 1 || static_cast<std::size_t>(v) > x.size())
                throw std::out_of_range("evaluate: variable index out of range");
            return x[static_cast<std::size_t>(v - 1)];
        }
        case NodeKind::Add: return evaluate(e.child_a(), t, x) + evaluate(e.child_b(), t, x);
        case NodeKind::Sub: return evaluate(e.child_a(), t, x) - evaluate(e.child_b(), t, x);
        case NodeKind::Mul: return evaluate(e.child_a(), t, x) * evaluate(e.child_b(), t, x);
        case NodeKind::Div: {
            double den = evaluate(e.child_b(), t, x);
            if (den == 0.0) throw SingularEvaluation(print_expr(e.child_b()));
            return evaluate(e.child_a(), t, x) / den;
        }
        case NodeKind::Pow: {
            double base = evaluate(e.child_a(), t, x);
            long k = e.pow_exponent();
            if (k < 0 && base == 0.0) throw SingularEvaluation(print_expr(e));
            return rat_pow(base, k);
        }
        case NodeKind::Neg: return -evaluate(e.child_a(), t, x);
        case NodeKind::Sin: return std::sin(evaluate(e.child_a(), t, x));
        case NodeKind::Cos: return std::cos(evaluate(e.child_a(), t, x));
        case NodeKind::Exp: return std::exp(evaluate(e.child_a(), t, x));
    }
    throw std::logic_error("evaluate: unreachable");
}

inline double evaluate(const Expr& e, double t, const std::vector<double>& x) {
    return evaluate(e, t, std::span<const double>(x));
}

/// Exact evaluation; throws on transcendental nodes and on zero denominators.
inline Rat evaluate_exact(const Expr& e, const Rat& t, std::span<const Rat> x) {
    switch (e.kind()) {
        case NodeKind::Constant: return e.value();
        case NodeKind::Variable: {
            int v = e.var_index();
            if (v == 0) return t;
            return x[static_cast<std::size_t>(v - 1)];
        }
        case NodeKind::Add: return evaluate_exact(e.child_a(), t, x) + evaluate_exact(e.child_b(), t, x);
        case NodeKind::Sub: return evaluate_exact(e.child_a(), t, x) - evaluate_exact(e.child_b(), t, x);
        case NodeKind::Mul: return evaluate_exact(e.child_a(), t, x) * evaluate_exact(e.child_b(), t, x);
        case NodeKind::Div: {
            Rat den = evaluate_exact(e.child_b(), t, x);
            if (den.is_zero()) throw SingularEvaluation(print_expr(e.child_b()));
            return evaluate_exact(e.child_a(), t, x) / den;
        }
        case NodeKind::Pow: {
            Rat base = evaluate_exact(e.child_a(), t, x);
            long k = e.pow_exponent();
            if (k < 0 && base.is_zero()) throw SingularEvaluation(print_expr(e));
            return rat_pow(base, k);
        }
        case NodeKind::Neg: return -evaluate_exact(e.child_a(), t, x);
        default:
            throw std::domain_error("evaluate_exact: transcendental node has no exact value");
    }
}

// ---------------------------------------------------------------------------
// Differentiation (exact, closed under the supported node set)
// ---------------------------------------------------------------------------

/// d e / d var, where var = 0 means t and var = i means x_i.
inline Expr differentiate(const Expr& e, int var) {
    switch (e.kind()) {
        case NodeKind::Constant: return Expr::constant(0);
        case NodeKind::Variable: return Expr::constant(e.var_index() == var ? 1 : 0);
        case NodeKind::Add:
            return Expr::add(differentiate(e.child_a(), var), differentiate(e.child_b(), var));
        case NodeKind::Sub:
            return Expr::sub(differentiate(e.child_a(), var), differentiate(e.child_b(), var));
        case NodeKind::Mul:
            return Expr::add(Expr::mul(differentiate(e.child_a(), var), e.child_b()),
                             Expr::mul(e.child_a(), differentiate(e.child_b(), var)));
        case NodeKind::Div:
            return Expr::div(
                Expr::sub(Expr::mul(differentiate(e.child_a(), var), e.child_b()),
                          Expr::mul(e.child_a(), differentiate(e.child_b(), var))),
                Expr::pow(e.child_b(), 2));
        case NodeKind::Pow: {
            long k = e.pow_exponent();
            if (k == 0) return Expr::constant(0);
            return Expr::mul(Expr::mul(Expr::constant(k), Expr::pow(e.child_a(), k - 1)),
                             differentiate(e.child_a(), var));
        }
        case NodeKind::Neg: return Expr::neg(differentiate(e.child_a(), var));
        case NodeKind::Sin:
            return Expr::mul(Expr::cos(e.child_a()), differentiate(e.child_a(), var));
        case NodeKind::Cos:
            return Expr::neg(Expr::mul(Expr::sin(e.child_a()), differentiate(e.child_a(), var)));
        case NodeKind::Exp:
            return Expr::mul(Expr::exp(e.child_a()), differentiate(e.child_a(), var));
    }
    throw std::logic_error("differentiate: unreachable");
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

inline Expr substitute(const Expr& e, int var, const Expr& replacement) {
    switch (e.kind()) {
        case NodeKind::Constant: return e;
        case NodeKind::Variable: return e.var_index() == var ? replacement : e;
        case NodeKind::Add:
            return Expr::add(substitute(e.child_a(), var, replacement),
                             substitute(e.child_b(), var, replacement));
        case NodeKind::Sub:
            return Expr::sub(substitute(e.child_a(), var, replacement),
                             substitute(e.child_b(), var, replacement));
        case NodeKind::Mul:
            return Expr::mul(substitute(e.child_a(), var, replacement),
                             substitute(e.child_b(), var, replacement));
        case NodeKind::Div:
            return Expr::div(substitute(e.child_a(), var, replacement),
                             substitute(e.child_b(), var, replacement));
        case NodeKind::Pow:
            return Expr::pow(substitute(e.child_a(), var, replacement), e.pow_exponent());
        case NodeKind::Neg: return Expr::neg(substitute(e.child_a(), var, replacement));
        case NodeKind::Sin: return Expr::sin(substitute(e.child_a(), var, replacement));
        case NodeKind::Cos: return Expr::cos(substitute(e.child_a(), var, replacement));
        case NodeKind::Exp: return Expr::exp(substitute(e.child_a(), var, replacement));
    }
    throw std::logic_error("substitute: unreachable");
}

// ---------------------------------------------------------------------------
// Conversion to polynomial / rational-function normal forms
// ---------------------------------------------------------------------------

/// Expands into a sparse multivariate polynomial over nvars = n+1 variables
/// (t, x1..xn); nullopt when the expression leaves the polynomial class.
inline std::optional<MultiPoly> to_multipoly(const Expr& e, int nvars,
                                             std::size_t term_budget = 1 << 16) {
    switch (e.kind()) {
        case NodeKind::Constant: return MultiPoly::constant(nvars, e.value());
        case NodeKind::Variable: return MultiPoly::variable(nvars, e.var_index());
        case NodeKind::Add: {
            auto a = to_multipoly(e.child_a(), nvars, term_budget);
            auto b = to_multipoly(e.child_b(), nvars, term_budget);
            if (!a || !b) return std::nullopt;
            auto r = mp_add(*a, *b);
            if (r.size() > term_budget) return std::nullopt;
            return r;
        }
        case NodeKind::Sub: {
            auto a = to_multipoly(e.child_a(), nvars, term_budget);
            auto b = to_multipoly(e.child_b(), nvars, term_budget);
            if (!a || !b) return std::nullopt;
            auto r = mp_sub(*a, *b);
            if (r.size() > term_budget) return std::nullopt;
            return r;
        }
        case NodeKind::Mul: {
            auto a = to_multipoly(e.child_a(), nvars, term_budget);
            auto b = to_multipoly(e.child_b(), nvars, term_budget);
            if (!a || !b) return std::nullopt;
            if (a->size() * std::max<std::size_t>(b->size(), 1) > 4 * term_budget)
                return std::nullopt;
            auto r = mp_mul(*a, *b);
            if (r.size() > term_budget) return std::nullopt;
            return r;
        }
        case NodeKind::Div: {
            // only division by a nonzero constant stays polynomial
            auto b = to_multipoly(e.child_b(), nvars, term_budget);
            if (!b || b->size() != 1) return std::nullopt;
            auto it = b->terms.begin();
            for (int v : it->first)
                if (v != 0) return std::nullopt;
            auto a = to_multipoly(e.child_a(), nvars, term_budget);
            if (!a) return std::nullopt;
            return mp_scale(*a, Rat(1) / it->second);
        }
        case NodeKind::Pow: {
            long k = e.pow_exponent();
            if (k < 0) return std::nullopt;
            auto a = to_multipoly(e.child_a(), nvars, term_budget);
            if (!a) return std::nullopt;
            MultiPoly r = MultiPoly::constant(nvars, Rat(1));
            for (long i = 0; i < k; ++i) {
                r = mp_mul(r, *a);
                if (r.size() > term_budget) return std::nullopt;
            }
            return r;
        }
        case NodeKind::Neg: {
            auto a = to_multipoly(e.child_a(), nvars, term_budget);
            if (!a) return std::nullopt;
            return mp_neg(*a);
        }
        default: return std::nullopt;  // transcendental
    }
}

/// Normal form num/den for the rational-function class; nullopt on sin/cos/exp.
inline std::optional<MultiRatFunc> to_multiratfunc(const Expr& e, int nvars) {
    switch (e.kind()) {
        case NodeKind::Constant:
            return MultiRatFunc::from_poly(MultiPoly::constant(nvars, e.value()));
        case NodeKind::Variable:
            return MultiRatFunc::from_poly(MultiPoly::variable(nvars, e.var_index()));
        case NodeKind::Add: {
            auto a = to_multiratfunc(e.child_a(), nvars), b = to_multiratfunc(e.child_b(), nvars);
            if (!a || !b) return std::nullopt;
            return mrf_add(*a, *b);
        }
        case NodeKind::Sub: {
            auto a = to_multiratfunc(e.child_a(), nvars), b = to_multiratfunc(e.child_b(), nvars);
            if (!a || !b) return std::nullopt;
            return mrf_sub(*a, *b);
        }
        case NodeKind::Mul: {
            auto a = to_multiratfunc(e.child_a(), nvars), b = to_multiratfunc(e.child_b(), nvars);
            if (!a || !b) return std::nullopt;
            return mrf_mul(*a, *b);
        }
        case NodeKind::Div: {
            auto a = to_multiratfunc(e.child_a(), nvars), b = to_multiratfunc(e.child_b(), nvars);
            if (!a || !b) return std::nullopt;
            if (b->num.is_zero()) return std::nullopt;  // identically singular
            return mrf_div(*a, *b);
        }
        case NodeKind::Pow: {
            auto a = to_multiratfunc(e.child_a(), nvars);
            if (!a) return std::nullopt;
            long k = e.pow_exponent();
            if (k < 0 && a->num.is_zero()) return std::nullopt;
            return mrf_pow(*a, k);
        }
        case NodeKind::Neg: {
            auto a = to_multiratfunc(e.child_a(), nvars);
            if (!a) return std::nullopt;
            return mrf_neg(*a);
        }
        default: return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Simplification: constant folding, 0/1 identities, and canonical
// like-term collection on polynomial subtrees.  Best-effort by design;
// equivalence is checked by random-point sampling in the tests.
// ---------------------------------------------------------------------------

namespace detail {

/// Rebuilds a canonical AST from a multivariate polynomial: sum of
/// coefficient-times-monomial terms, graded-lex ordered, left-associated.
inline Expr expr_from_multipoly(const MultiPoly& p) {
    if (p.terms.empty()) return Expr::constant(0);
    struct Term {
        MultiPoly::Key key;
        Rat coeff;
        long total;
    };
    std::vector<Term> terms;
    for (const auto& [k, c] : p.terms) {
        long tot = 0;
        for (int e : k) tot += e;
        terms.push_back({k, c, tot});
    }
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
        if (a.total != b.total) return a.total < b.total;
        return a.key < b.key;
    });
    Expr sum;
    for (const auto& term : terms) {
        Expr mono;
        for (int v = 0; v < p.nvars; ++v) {
            if (term.key[v] == 0) continue;
            Expr factor = term.key[v] == 1 ? Expr::variable(v)
                                           : Expr::pow(Expr::variable(v), term.key[v]);
            mono = mono.valid() ? Expr::mul(mono, factor) : factor;
        }
        Expr t;
        if (!mono.valid())
            t = Expr::constant(term.coeff);
        else if (term.coeff == Rat(1))
            t = mono;
        else
            t = Expr::mul(Expr::constant(term.coeff), mono);
        sum = sum.valid() ? Expr::add(sum, t) : t;
    }
    return sum;
}

inline int max_var_index(const Expr& e) {
    switch (e.kind()) {
        case NodeKind::Constant: return -1;
        case NodeKind::Variable: return e.var_index();
        default: {
            int m = -1;
            if (e.child_a().valid()) m = std::max(m, max_var_index(e.child_a()));
            if (e.child_b().valid()) m = std::max(m, max_var_index(e.child_b()));
            return m;
        }
    }
}

}  // namespace detail

inline Expr simplify(const Expr& e) {
    // polynomial subtree: expand + collect like terms into canonical form
    int nvars = detail::max_var_index(e) + 1;
    if (nvars == 0) nvars = 1;
    if (auto p = to_multipoly(e, nvars, 4096)) return detail::expr_from_multipoly(*p);

    auto is_one = [](const Expr& x) { return x.is_constant(Rat(1)); };
    switch (e.kind()) {
        case NodeKind::Constant:
        case NodeKind::Variable: return e;
        case NodeKind::Add: {
            Expr a = simplify(e.child_a()), b = simplify(e.child_b());
            if (a.is_zero_constant()) return b;
            if (b.is_zero_constant()) return a;
            if (a.kind_is(NodeKind::Constant) && b.kind_is(NodeKind::Constant))
                return Expr::constant(a.value() + b.value());
            return Expr::add(a, b);
        }
        case NodeKind::Sub: {
            Expr a = simplify(e.child_a()), b = simplify(e.child_b());
            if (b.is_zero_constant()) return a;
            if (a.is_zero_constant()) return Expr::neg(b);
            if (a.kind_is(NodeKind::Constant) && b.kind_is(NodeKind::Constant))
                return Expr::constant(a.value() - b.value());
            if (struct_equal(a, b)) return Expr::constant(0);
            return Expr::sub(a, b);
        }
        case NodeKind::Mul: {
            Expr a = simplify(e.child_a()), b = simplify(e.child_b());
            if (a.is_zero_constant() || b.is_zero_constant()) return Expr::constant(0);
            if (is_one(a)) return b;
            if (is_one(b)) return a;
            if (a.kind_is(NodeKind::Constant) && b.kind_is(NodeKind::Constant))
                return Expr::constant(a.value() * b.value());
            return Expr::mul(a, b);
        }
        case NodeKind::Div: {
            Expr a = simplify(e.child_a()), b = simplify(e.child_b());
            if (a.is_zero_constant() && !b.is_zero_constant()) return Expr::constant(0);
            if (is_one(b)) return a;
            return Expr::div(a, b);
        }
        case NodeKind::Pow: {
            long k = e.pow_exponent();
            Expr a = simplify(e.child_a());
            if (k == 0) return Expr::constant(1);
            if (k == 1) return a;
            if (a.kind_is(NodeKind::Constant) && (k >= 0 || !a.value().is_zero()))
                return Expr::constant(rat_pow(a.value(), k));
            return Expr::pow(a, k);
        }
        case NodeKind::Neg: {
            Expr a = simplify(e.child_a());
            if (a.kind_is(NodeKind::Constant)) return Expr::constant(-a.value());
            if (a.kind_is(NodeKind::Neg)) return a.child_a();
            return Expr::neg(a);
        }
        case NodeKind::Sin: return Expr::sin(simplify(e.child_a()));
        case NodeKind::Cos: return Expr::cos(simplify(e.child_a()));
        case NodeKind::Exp: return Expr::exp(simplify(e.child_a()));
    }
    throw std::logic_error("simplify: unreachable");
}

// ---------------------------------------------------------------------------
// Printing (re-parses to the identical AST; see grammar in parse below)
// ---------------------------------------------------------------------------

namespace detail {

// precedence: + - (1) < * / (2) < unary - (3) < ^ (4) < atom (5)
inline int precedence(const Expr& e) {
    switch (e.kind()) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Neg: return 3;
        case NodeKind::Pow: return 4;
        case NodeKind::Constant: {
            const Rat& v = e.value();
            if (v < 0) return 3;                   // prints with a leading '-'
            if (denominator(v) != 1) return 2;     // prints as p/q
            return 5;
        }
        default: return 5;
    }
}

inline void print_rec(const Expr& e, std::ostream& os, int parent_prec, bool right_side) {
    int prec = precedence(e);
    bool parens = prec < parent_prec || (right_side && prec == parent_prec);
    if (parens) os << '(';
    switch (e.kind()) {
        case NodeKind::Constant: os << rat_to_string(e.value()); break;
        case NodeKind::Variable:
            if (e.var_index() == 0)
                os << 't';
            else
                os << 'x' << e.var_index();
            break;
        case NodeKind::Add:
            print_rec(e.child_a(), os, 1, false);
            os << " + ";
            print_rec(e.child_b(), os, 1, true);
            break;
        case NodeKind::Sub:
            print_rec(e.child_a(), os, 1, false);
            os << " - ";
            print_rec(e.child_b(), os, 1, true);
            break;
        case NodeKind::Mul:
            print_rec(e.child_a(), os, 2, false);
            os << '*';
            print_rec(e.child_b(), os, 2, true);
            break;
        case NodeKind::Div:
            print_rec(e.child_a(), os, 2, false);
            os << '/';
            print_rec(e.child_b(), os, 2, true);
            break;
        case NodeKind::Pow:
            print_rec(e.child_a(), os, 5, false);
            os << '^' << e.pow_exponent();
            break;
        case NodeKind::Neg:
            os << '-';
            print_rec(e.child_a(), os, 3, true);
            break;
        case NodeKind::Sin:
            os << "sin(";
            print_rec(e.child_a(), os, 0, false);
            os << ')';
            break;
        case NodeKind::Cos:
            os << "cos(";
            print_rec(e.child_a(), os, 0, false);
            os << ')';
            break;
        case NodeKind::Exp:
            os << "exp(";
            print_rec(e.child_a(), os, 0, false);
            os << ')';
            break;
    }
    if (parens) os << ')';
}

}  // namespace detail

inline std::string print_expr(const Expr& e) {
    std::ostringstream os;
    detail::print_rec(e, os, 0, false);
    return os.str();
}

// ---------------------------------------------------------------------------
// Parsing
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' ('-')? integer)?
//   atom   := number | 't' | 'xK' | func '(' expr ')' | '(' expr ')'
//   func   := 'sin' | 'cos' | 'exp'
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
public:
    Parser(std::string_view text, int dimension) : text_(text), n_(dimension) {}

    Expr parse() {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int n_;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    Expr parse_expr() {
        Expr e = parse_term();
        for (;;) {
            if (consume('+'))
                e = Expr::add(e, parse_term());
            else if (consume('-'))
                e = Expr::sub(e, parse_term());
            else
                return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_unary();
        for (;;) {
            if (consume('*'))
                e = Expr::mul(e, parse_unary());
            else if (consume('/'))
                e = Expr::div(e, parse_unary());
            else
                return e;
        }
    }

    Expr parse_unary() {
        if (consume('-')) return Expr::neg(parse_unary());
        if (consume('+')) return parse_unary();
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_atom();
        if (consume('^')) {
            skip_ws();
            bool neg = consume('-');
            std::size_t start = pos_;
            long e = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                e = e * 10 + (text_[pos_++] - '0');
            if (pos_ == start) throw ParseError("expected integer exponent after '^'", pos_);
            return Expr::pow(base, neg ? -e : e);
        }
        return base;
    }

    Expr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            if (!consume(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    Expr parse_number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        // scientific exponent
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            } else {
                pos_ = save;
            }
        }
        try {
            return Expr::constant(parse_rational(std::string(text_.substr(start, pos_ - start))));
        } catch (const std::invalid_argument&) {
            throw ParseError("malformed number", start);
        }
    }

    Expr parse_identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        if (name == "t") return Expr::t();
        if (name == "sin" || name == "cos" || name == "exp") {
            if (!consume('(')) throw ParseError("expected '(' after function name", pos_);
            Expr arg = parse_expr();
            if (!consume(')')) throw ParseError("expected ')'", pos_);
            if (name == "sin") return Expr::sin(arg);
            if (name == "cos") return Expr::cos(arg);
            return Expr::exp(arg);
        }
        if (name.size() >= 2 && name[0] == 'x') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
            if (digits) {
                int idx = std::stoi(name.substr(1));
                if (idx < 1 || idx > n_)
                    throw ParseError("variable " + name + " exceeds declared dimension " +
                                         std::to_string(n_),
                                     start);
                return Expr::x(idx);
            }
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }
};

}  // namespace detail

/// Parses an expression in variables t, x1..xn.
inline Expr parse(std::string_view text, int dimension) {
    return detail::Parser(text, dimension).parse();
}

inline VecExpr parse_vector(const std::vector<std::string>& components, int dimension) {
    VecExpr v;
    v.reserve(components.size());
    for (const auto& s : components) v.push_back(parse(s, dimension));
    return v;
}

}  // namespace tocl
