#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tocl {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

inline bool is_zero(const Rat& r) { return r.is_zero(); }
inline bool is_zero(double x) { return x == 0.0; }

inline double to_double(double x) { return x; }

/// base^e for integer e (e may be negative; base must be nonzero then).
inline Rat rat_pow(const Rat& base, long e) {
    if (e == 0) return Rat(1);
    if (e < 0) {
        if (base.is_zero()) throw std::domain_error("rat_pow: zero base with negative exponent");
        return Rat(1) / rat_pow(base, -e);
    }
    Rat acc(1), sq(base);
    long k = e;
    while (k > 0) {
        if (k & 1) acc *= sq;
        k >>= 1;
        if (k) sq *= sq;
    }
    return acc;
}

inline double rat_pow(double base, long e) {
    if (e == 0) return 1.0;
    if (e < 0) return 1.0 / rat_pow(base, -e);
    double acc = 1.0, sq = base;
    long k = e;
    while (k > 0) {
        if (k & 1) acc *= sq;
        k >>= 1;
        if (k) sq *= sq;
    }
    return acc;
}

/// Falling factorial k(k-1)...(k-j+1); k^underline(0) = 1.
inline Int falling_factorial(long k, long j) {
    Int acc(1);
    for (long s = 0; s < j; ++s) acc *= Int(k - s);
    return acc;
}

inline Int factorial(long k) {
    Int acc(1);
    for (long s = 2; s <= k; ++s) acc *= Int(s);
    return acc;
}

/// Parses "p", "p/q", or a decimal such as "-0.25" / "1e-3" into an exact rational.
inline Rat parse_rational(const std::string& text) {
    auto bad = [&]() { return std::invalid_argument("parse_rational: cannot parse '" + text + "'"); };
    std::size_t slash = text.find('/');
    if (slash != std::string::npos) {
        Rat num = parse_rational(text.substr(0, slash));
        Rat den = parse_rational(text.substr(slash + 1));
        if (den.is_zero()) throw bad();
        return num / den;
    }
    std::size_t i = 0, n = text.size();
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    bool neg = false;
    if (i < n && (text[i] == '+' || text[i] == '-')) neg = (text[i++] == '-');
    Int mantissa(0);
    long frac_digits = 0, exponent = 0;
    bool any = false, in_frac = false;
    for (; i < n; ++i) {
        char c = text[i];
        if (c >= '0' && c <= '9') {
            mantissa = mantissa * 10 + (c - '0');
            if (in_frac) ++frac_digits;
            any = true;
        } else if (c == '.' && !in_frac) {
            in_frac = true;
        } else if ((c == 'e' || c == 'E') && any) {
            exponent = std::stol(text.substr(i + 1));
            i = n;
            break;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            break;
        } else {
            throw bad();
        }
    }
    if (!any) throw bad();
    Rat value(mantissa);
    long shift = exponent - frac_digits;
    if (shift > 0) value *= Rat(boost::multiprecision::pow(Int(10), static_cast<unsigned>(shift)));
    if (shift < 0) value /= Rat(boost::multiprecision::pow(Int(10), static_cast<unsigned>(-shift)));
    return neg ? -value : value;
}

/// "p" when integral, else "p/q".
inline std::string rat_to_string(const Rat& r) {
    std::string s = numerator(r).str();
    if (denominator(r) != 1) s += "/" + denominator(r).str();
    return s;
}

}  // namespace tocl
