#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tocl/polynomial.hpp"
#include "tocl/rational.hpp"

namespace tocl {

inline constexpr int kDefaultTruncationOrder = 40;

class SeriesError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Truncated Laurent series sum_{e=lead}^{valid_order} coeffs[e-lead] t^e.
///
/// `valid_order` is the highest exponent whose coefficient is trusted;
/// arithmetic propagates it (division by a positive-lead series loses
/// validity, see div()).  Normalized so coeffs.front() != 0 unless the
/// series is identically zero as far as computed.
template <class S>
struct LaurentSeries {
    int lead = 0;
    std::vector<S> coeffs;
    int valid_order = kDefaultTruncationOrder;

    static LaurentSeries zero(int valid_order = kDefaultTruncationOrder) {
        return LaurentSeries{0, {}, valid_order};
    }

    static LaurentSeries from_coeffs(int lead, std::vector<S> coeffs,
                                     int valid_order) {
        LaurentSeries s{lead, std::move(coeffs), valid_order};
        s.normalize();
        return s;
    }

    static LaurentSeries monomial(const S& c, int exponent,
                                  int valid_order = kDefaultTruncationOrder) {
        return from_coeffs(exponent, {c}, valid_order);
    }

    static LaurentSeries constant(const S& c, int valid_order = kDefaultTruncationOrder) {
        return monomial(c, 0, valid_order);
    }

    bool is_zero() const { return coeffs.empty(); }

    /// First exponent that can be nonzero (valid_order+1 for a computed-zero series).
    int first_exponent() const { return coeffs.empty() ? valid_order + 1 : lead; }

    int last_exponent() const { return lead + static_cast<int>(coeffs.size()) - 1; }

    S coefficient(int exponent) const {
        if (exponent < lead || exponent > last_exponent()) return S(0);
        return coeffs[static_cast<std::size_t>(exponent - lead)];
    }

    void normalize() {
        std::size_t drop = 0;
        while (drop < coeffs.size() && tocl::is_zero(coeffs[drop])) ++drop;
        if (drop > 0) {
            coeffs.erase(coeffs.begin(), coeffs.begin() + static_cast<long>(drop));
            lead += static_cast<int>(drop);
        }
        // discard anything beyond the trusted order
        if (!coeffs.empty() && last_exponent() > valid_order) {
            int keep = valid_order - lead + 1;
            coeffs.resize(keep > 0 ? static_cast<std::size_t>(keep) : 0);
        }
        while (!coeffs.empty() && tocl::is_zero(coeffs.back())) coeffs.pop_back();
        if (coeffs.empty()) lead = 0;
    }

    double evaluate(double t) const {
        double acc = 0.0;
        for (std::size_t i = coeffs.size(); i-- > 0;)
            acc = acc * t + to_double(coeffs[i]);
        return acc * rat_pow(t, lead);
    }
};

template <class S>
LaurentSeries<S> add(const LaurentSeries<S>& a, const LaurentSeries<S>& b) {
    int valid = std::min(a.valid_order, b.valid_order);
    if (a.is_zero() && b.is_zero()) return LaurentSeries<S>::zero(valid);
    int lo = std::min(a.first_exponent(), b.first_exponent());
    int hi = std::min(std::max(a.last_exponent(), b.last_exponent()), valid);
    if (hi < lo) return LaurentSeries<S>::zero(valid);
    std::vector<S> c(static_cast<std::size_t>(hi - lo + 1), S(0));
    for (int e = lo; e <= hi; ++e)
        c[static_cast<std::size_t>(e - lo)] = a.coefficient(e) + b.coefficient(e);
    return LaurentSeries<S>::from_coeffs(lo, std::move(c), valid);
}

template <class S>
LaurentSeries<S> neg(const LaurentSeries<S>& a) {
    LaurentSeries<S> r = a;
    for (auto& c : r.coeffs) c = -c;
    return r;
}

template <class S>
LaurentSeries<S> sub(const LaurentSeries<S>& a, const LaurentSeries<S>& b) {
    return add(a, neg(b));
}

template <class S>
LaurentSeries<S> scale(const LaurentSeries<S>& a, const S& c) {
    LaurentSeries<S> r = a;
    for (auto& v : r.coeffs) v *= c;
    r.normalize();
    return r;
}

template <class S>
LaurentSeries<S> shift(const LaurentSeries<S>& a, int k) {
    LaurentSeries<S> r = a;
    r.lead += k;
    r.valid_order += k;
    return r;
}

template <class S>
LaurentSeries<S> mul(const LaurentSeries<S>& a, const LaurentSeries<S>& b) {
    // product coefficient at e needs every split i+j=e with i,j trusted
    int valid = std::min(a.valid_order + b.first_exponent(),
                         b.valid_order + a.first_exponent());
    if (a.is_zero() || b.is_zero()) return LaurentSeries<S>::zero(valid);
    int lo = a.lead + b.lead;
    int hi = std::min(a.last_exponent() + b.last_exponent(), valid);
    if (hi < lo) return LaurentSeries<S>::zero(valid);
    std::vector<S> c(static_cast<std::size_t>(hi - lo + 1), S(0));
    for (std::size_t i = 0; i < a.coeffs.size(); ++i) {
        if (tocl::is_zero(a.coeffs[i])) continue;
        for (std::size_t j = 0; j < b.coeffs.size(); ++j) {
            int e = a.lead + static_cast<int>(i) + b.lead + static_cast<int>(j);
            if (e > hi) break;
            c[static_cast<std::size_t>(e - lo)] += a.coeffs[i] * b.coeffs[j];
        }
    }
    return LaurentSeries<S>::from_coeffs(lo, std::move(c), valid);
}

/// a / b.  Division by a series of positive lead m loses m orders of
/// validity (and raises the pole), tracked via valid_order.
template <class S>
LaurentSeries<S> div(const LaurentSeries<S>& a, const LaurentSeries<S>& b) {
    if (b.is_zero()) throw SeriesError("series division by zero series");
    // invert the unit part of b to relative order mb
    int mb = b.valid_order - b.lead;
    if (mb < 0) throw SeriesError("series division: divisor has no trusted coefficients");
    std::vector<S> inv(static_cast<std::size_t>(mb + 1), S(0));
    const S& b0 = b.coeffs.front();
    inv[0] = S(1) / b0;
    for (int k = 1; k <= mb; ++k) {
        S acc(0);
        for (int j = 1; j <= k; ++j) {
            S bj = (static_cast<std::size_t>(j) < b.coeffs.size()) ? b.coeffs[static_cast<std::size_t>(j)] : S(0);
            acc += bj * inv[static_cast<std::size_t>(k - j)];
        }
        inv[static_cast<std::size_t>(k)] = -acc / b0;
    }
    LaurentSeries<S> binv = LaurentSeries<S>::from_coeffs(-b.lead, std::move(inv),
                                                          mb - b.lead);
    return mul(a, binv);
}

template <class S>
LaurentSeries<S> derivative(const LaurentSeries<S>& a, int order = 1) {
    LaurentSeries<S> r = a;
    for (int d = 0; d < order; ++d) {
        std::vector<S> c;
        c.reserve(r.coeffs.size());
        int new_lead = r.lead - 1;
        for (std::size_t i = 0; i < r.coeffs.size(); ++i) {
            int e = r.lead + static_cast<int>(i);
            c.push_back(r.coeffs[i] * S(e));
        }
        r = LaurentSeries<S>::from_coeffs(new_lead, std::move(c), r.valid_order - 1);
    }
    return r;
}

/// Term-wise antiderivative with F(0)=0 for nonnegative-lead input;
/// a t^{-1} term has no Laurent antiderivative and is rejected.
template <class S>
LaurentSeries<S> antiderivative(const LaurentSeries<S>& a) {
    if (!a.is_zero() && a.lead <= -1 && !tocl::is_zero(a.coefficient(-1)))
        throw SeriesError("antiderivative: t^-1 term present");
    std::vector<S> c;
    c.reserve(a.coeffs.size());
    for (std::size_t i = 0; i < a.coeffs.size(); ++i) {
        int e = a.lead + static_cast<int>(i);
        c.push_back(e == -1 ? S(0) : a.coeffs[i] / S(e + 1));
    }
    return LaurentSeries<S>::from_coeffs(a.lead + 1, std::move(c), a.valid_order + 1);
}

inline LaurentSeries<double> to_double_series(const LaurentSeries<Rat>& a) {
    std::vector<double> c;
    c.reserve(a.coeffs.size());
    for (const auto& v : a.coeffs) c.push_back(to_double(v));
    return LaurentSeries<double>{a.lead, std::move(c), a.valid_order};
}

inline const LaurentSeries<double>& to_double_series(const LaurentSeries<double>& a) { return a; }

/// Expands num(t)/den(t) as a Laurent series, trusted to K orders past the lead.
template <class S>
LaurentSeries<S> laurent_from_ratfunc(const Poly<S>& num, const Poly<S>& den, int K) {
    long low_den = poly_low(den);
    if (low_den < 0) throw SeriesError("laurent_from_ratfunc: zero denominator");
    long low_num = poly_low(num);
    int pole_shift = static_cast<int>(-low_den);
    if (low_num < 0) return LaurentSeries<S>::zero(pole_shift + K);
    int lead = static_cast<int>(low_num - low_den);
    // strip common t powers: unit-part quotient, then shift back by `lead`
    LaurentSeries<S> a = LaurentSeries<S>::from_coeffs(
        0, std::vector<S>(num.begin() + low_num, num.end()), K);
    LaurentSeries<S> b = LaurentSeries<S>::from_coeffs(
        0, std::vector<S>(den.begin() + low_den, den.end()), K);
    return shift(div(a, b), lead);
}

// ---------------------------------------------------------------------------
// Least-squares Laurent fit from samples (numerical route for gamma)
// ---------------------------------------------------------------------------

struct FitResult {
    LaurentSeries<double> series;
    double residual = 0.0;   // rms misfit on the samples
    double condition = 0.0;  // condition number of the scaled Vandermonde
};

class FitError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fits t^p * f(t) by a degree-d polynomial on the samples and divides back,
/// giving a Laurent series with lead >= -p.  Samples should be symmetric in
/// +-t to suppress odd/even aliasing near the pole.
inline FitResult fit_from_samples(const std::vector<std::pair<double, double>>& samples,
                                  int pole_order, int degree,
                                  double cond_threshold = 1e12) {
    if (samples.empty()) throw FitError("fit_from_samples: no samples");
    const auto m = static_cast<Eigen::Index>(samples.size());
    if (m < degree + 1) throw FitError("fit_from_samples: need at least degree+1 samples");
    bool all_zero = true;
    for (const auto& s : samples) all_zero = all_zero && s.second == 0.0;
    if (all_zero) {
        FitResult r;
        r.series = LaurentSeries<double>::zero(degree - pole_order);
        return r;
    }
    // column scaling by max |t|^j keeps the Vandermonde condition honest
    double tmax = 0.0;
    for (const auto& s : samples) tmax = std::max(tmax, std::abs(s.first));
    Eigen::MatrixXd A(m, degree + 1);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double t = samples[static_cast<std::size_t>(i)].first;
        if (t == 0.0) throw FitError("fit_from_samples: sample at t=0");
        double v = samples[static_cast<std::size_t>(i)].second;
        rhs(i) = v * rat_pow(t, pole_order);
        double ts = t / tmax;
        double p = 1.0;
        for (int j = 0; j <= degree; ++j) {
            A(i, j) = p;
            p *= ts;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double cond = svd.singularValues()(0) /
                  svd.singularValues()(svd.singularValues().size() - 1);
    if (!(cond < cond_threshold))
        throw FitError("fit_from_samples: ill-conditioned fit (cond=" + std::to_string(cond) +
                       "); reduce degree or widen samples");
    Eigen::VectorXd sol = svd.solve(rhs);
    FitResult result;
    result.condition = cond;
    result.residual = std::sqrt((A * sol - rhs).squaredNorm() / static_cast<double>(m));
    std::vector<double> coeffs(static_cast<std::size_t>(degree + 1));
    for (int j = 0; j <= degree; ++j)
        coeffs[static_cast<std::size_t>(j)] = sol(j) * rat_pow(1.0 / tmax, j);
    result.series = LaurentSeries<double>{-pole_order, std::move(coeffs), degree - pole_order};
    result.series.valid_order = degree - pole_order;
    return result;
}

}  // namespace tocl
