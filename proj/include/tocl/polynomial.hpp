#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

#include "tocl/rational.hpp"

namespace tocl {

// ---------------------------------------------------------------------------
// Dense univariate polynomials, index = exponent.
// ---------------------------------------------------------------------------

template <class S>
using Poly = std::vector<S>;

template <class S>
void poly_trim(Poly<S>& p) {
    while (!p.empty() && is_zero(p.back())) p.pop_back();
}

template <class S>
Poly<S> poly_add(const Poly<S>& a, const Poly<S>& b) {
    Poly<S> r(std::max(a.size(), b.size()), S(0));
    for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
    poly_trim(r);
    return r;
}

template <class S>
Poly<S> poly_sub(const Poly<S>& a, const Poly<S>& b) {
    Poly<S> r(std::max(a.size(), b.size()), S(0));
    for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) r[i] -= b[i];
    poly_trim(r);
    return r;
}

template <class S>
Poly<S> poly_mul(const Poly<S>& a, const Poly<S>& b) {
    if (a.empty() || b.empty()) return {};
    Poly<S> r(a.size() + b.size() - 1, S(0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    poly_trim(r);
    return r;
}

template <class S>
Poly<S> poly_scale(const Poly<S>& a, const S& c) {
    Poly<S> r = a;
    for (auto& v : r) v *= c;
    poly_trim(r);
    return r;
}

template <class S>
Poly<S> poly_pow(const Poly<S>& a, long e) {
    Poly<S> r{S(1)};
    for (long i = 0; i < e; ++i) r = poly_mul(r, a);
    return r;
}

template <class S, class T>
T poly_eval(const Poly<S>& p, const T& x) {
    T acc(0);
    for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + T(p[i]);
    return acc;
}

/// Index of the lowest nonzero coefficient, or -1 for the zero polynomial.
template <class S>
long poly_low(const Poly<S>& p) {
    for (std::size_t i = 0; i < p.size(); ++i)
        if (!is_zero(p[i])) return static_cast<long>(i);
    return -1;
}

template <class S>
long poly_degree(const Poly<S>& p) {
    for (std::size_t i = p.size(); i-- > 0;)
        if (!is_zero(p[i])) return static_cast<long>(i);
    return -1;
}

// ---------------------------------------------------------------------------
// Sparse multivariate polynomials over Rat; the exponent key covers all
// declared variables (t, x1..xn).  Canonical: no zero coefficients stored.
// ---------------------------------------------------------------------------

struct MultiPoly {
    using Key = std::vector<int>;
    int nvars = 0;
    std::map<Key, Rat> terms;

    static MultiPoly zero(int nvars) { return MultiPoly{nvars, {}}; }

    static MultiPoly constant(int nvars, const Rat& c) {
        MultiPoly p{nvars, {}};
        if (!c.is_zero()) p.terms[Key(nvars, 0)] = c;
        return p;
    }

    static MultiPoly variable(int nvars, int index) {
        MultiPoly p{nvars, {}};
        Key k(nvars, 0);
        k.at(index) = 1;
        p.terms[k] = Rat(1);
        return p;
    }

    bool is_zero() const { return terms.empty(); }

    std::size_t size() const { return terms.size(); }

    void add_term(const Key& k, const Rat& c) {
        auto it = terms.find(k);
        if (it == terms.end()) {
            if (!c.is_zero()) terms[k] = c;
        } else {
            it->second += c;
            if (it->second.is_zero()) terms.erase(it);
        }
    }
};

inline MultiPoly mp_add(const MultiPoly& a, const MultiPoly& b) {
    MultiPoly r = a;
    for (const auto& [k, c] : b.terms) r.add_term(k, c);
    return r;
}

inline MultiPoly mp_neg(const MultiPoly& a) {
    MultiPoly r = a;
    for (auto& [k, c] : r.terms) c = -c;
    return r;
}

inline MultiPoly mp_sub(const MultiPoly& a, const MultiPoly& b) { return mp_add(a, mp_neg(b)); }

inline MultiPoly mp_mul(const MultiPoly& a, const MultiPoly& b) {
    MultiPoly r = MultiPoly::zero(a.nvars);
    for (const auto& [ka, ca] : a.terms) {
        for (const auto& [kb, cb] : b.terms) {
            MultiPoly::Key k(a.nvars);
            for (int i = 0; i < a.nvars; ++i) k[i] = ka[i] + kb[i];
            r.add_term(k, ca * cb);
        }
    }
    return r;
}

inline MultiPoly mp_scale(const MultiPoly& a, const Rat& c) {
    if (c.is_zero()) return MultiPoly::zero(a.nvars);
    MultiPoly r = a;
    for (auto& [k, v] : r.terms) v *= c;
    return r;
}

inline MultiPoly mp_pow(const MultiPoly& a, long e) {
    MultiPoly r = MultiPoly::constant(a.nvars, Rat(1));
    for (long i = 0; i < e; ++i) r = mp_mul(r, a);
    return r;
}

/// Substitutes exact values for the variables listed in `fixed` (index -> value);
/// remaining variables stay symbolic.
inline MultiPoly mp_substitute(const MultiPoly& a, const std::map<int, Rat>& fixed) {
    MultiPoly r = MultiPoly::zero(a.nvars);
    for (const auto& [k, c] : a.terms) {
        Rat coeff = c;
        MultiPoly::Key nk = k;
        for (const auto& [idx, val] : fixed) {
            coeff *= rat_pow(val, k[idx]);
            nk[idx] = 0;
        }
        r.add_term(nk, coeff);
    }
    return r;
}

/// Collapses a MultiPoly that involves only variable `index` into a dense
/// univariate polynomial.  Throws if another variable appears.
inline Poly<Rat> mp_to_univariate(const MultiPoly& a, int index) {
    Poly<Rat> p;
    for (const auto& [k, c] : a.terms) {
        for (int i = 0; i < a.nvars; ++i)
            if (i != index && k[i] != 0)
                throw std::logic_error("mp_to_univariate: polynomial is not univariate");
        std::size_t e = static_cast<std::size_t>(k[index]);
        if (p.size() <= e) p.resize(e + 1, Rat(0));
        p[e] += c;
    }
    poly_trim(p);
    return p;
}

// ---------------------------------------------------------------------------
// Multivariate rational functions num/den (no gcd reduction; zero iff num==0).
// ---------------------------------------------------------------------------

struct MultiRatFunc {
    MultiPoly num, den;

    static MultiRatFunc from_poly(const MultiPoly& p) {
        return {p, MultiPoly::constant(p.nvars, Rat(1))};
    }

    bool is_zero() const { return num.is_zero(); }
};

inline MultiRatFunc mrf_add(const MultiRatFunc& a, const MultiRatFunc& b) {
    return {mp_add(mp_mul(a.num, b.den), mp_mul(b.num, a.den)), mp_mul(a.den, b.den)};
}

inline MultiRatFunc mrf_sub(const MultiRatFunc& a, const MultiRatFunc& b) {
    return {mp_sub(mp_mul(a.num, b.den), mp_mul(b.num, a.den)), mp_mul(a.den, b.den)};
}

inline MultiRatFunc mrf_mul(const MultiRatFunc& a, const MultiRatFunc& b) {
    return {mp_mul(a.num, b.num), mp_mul(a.den, b.den)};
}

inline MultiRatFunc mrf_div(const MultiRatFunc& a, const MultiRatFunc& b) {
    if (b.num.is_zero()) throw std::domain_error("mrf_div: division by zero rational function");
    return {mp_mul(a.num, b.den), mp_mul(a.den, b.num)};
}

inline MultiRatFunc mrf_neg(const MultiRatFunc& a) { return {mp_neg(a.num), a.den}; }

inline MultiRatFunc mrf_pow(const MultiRatFunc& a, long e) {
    if (e >= 0) return {mp_pow(a.num, e), mp_pow(a.den, e)};
    if (a.num.is_zero()) throw std::domain_error("mrf_pow: zero base with negative exponent");
    return {mp_pow(a.den, -e), mp_pow(a.num, -e)};
}

}  // namespace tocl
