#include <catch2/catch_amalgamated.hpp>

#include "tocl/series.hpp"
#include "test_helpers.hpp"

using namespace tocl;

namespace {

using RS = LaurentSeries<Rat>;

// gamma_2 and gamma_3 of the benchmark system as rational functions of t
const Poly<Rat> kGamma2Num = {Rat(0), Rat(-36), Rat(0), Rat(24)};          // 12t(2t^2-3)
const Poly<Rat> kGamma3Num = {Rat(9), Rat(0), Rat(18), Rat(24), Rat(0), Rat(-12)};
const Poly<Rat> kDen = {Rat(9), Rat(0), Rat(6), Rat(6), Rat(0), Rat(-2)};  // 9+6t^2+6t^3-2t^5
const Poly<Rat> kDenShifted = {Rat(0), Rat(9), Rat(0), Rat(6), Rat(6), Rat(0), Rat(-2)};

double eval_ratfunc(const Poly<Rat>& num, const Poly<Rat>& den, double t) {
    return poly_eval(num, t) / poly_eval(den, t);
}

RS random_series(int lead, int terms) {
    std::vector<Rat> c;
    c.reserve(static_cast<std::size_t>(terms));
    for (int i = 0; i < terms; ++i)
        c.emplace_back(static_cast<long>(testutil::uniform(-9, 9)),
                       static_cast<long>(testutil::uniform(1, 5)));
    if (c[0].is_zero()) c[0] = Rat(1);
    return RS::from_coeffs(lead, std::move(c), lead + 40);
}

}  // namespace

TEST_CASE("one over t times t is one") {
    RS inv_t = RS::monomial(Rat(1), -1);
    RS t = RS::monomial(Rat(1), 1);
    RS p = mul(inv_t, t);
    CHECK(p.lead == 0);
    REQUIRE(p.coeffs.size() == 1);
    CHECK(p.coeffs[0] == Rat(1));
}

TEST_CASE("gamma_3 quotient has a simple pole with residue one") {
    RS g3 = laurent_from_ratfunc(kGamma3Num, kDenShifted, 40);
    CHECK(g3.lead == -1);
    CHECK(g3.coefficient(-1) == Rat(1));
    CHECK(g3.coefficient(0) == Rat(0));
}

TEST_CASE("gamma_2 quotient starts at -4t") {
    RS g2 = laurent_from_ratfunc(kGamma2Num, kDen, 40);
    CHECK(g2.lead == 1);
    CHECK(g2.coefficient(1) == Rat(-4));
    CHECK(g2.coefficient(2) == Rat(0));
}

TEST_CASE("derivative rules") {
    // d/dt(-t + t^4/3) = -1 + (4/3)t^3
    RS g2 = RS::from_coeffs(0, {Rat(0), Rat(-1), Rat(0), Rat(0), Rat(1, 3)}, 40);
    RS d = derivative(g2);
    CHECK(d.coefficient(0) == Rat(-1));
    CHECK(d.coefficient(1) == Rat(0));
    CHECK(d.coefficient(3) == Rat(4, 3));

    RS c = RS::constant(Rat(7));
    CHECK(derivative(c).is_zero());

    RS t3 = RS::monomial(Rat(1), 3);
    RS d3 = derivative(t3, 3);
    CHECK(to_double_series(d3).evaluate(0.0) == 6.0);
}

TEST_CASE("division undoes multiplication; lead exponents add and subtract") {
    RS a = random_series(-2, 12);
    RS b = random_series(1, 12);
    RS p = mul(a, b);
    CHECK(p.lead == a.lead + b.lead);
    RS q = div(p, b);
    CHECK(q.lead == a.lead);
    for (int e = q.first_exponent(); e <= q.valid_order; ++e)
        CHECK(q.coefficient(e) == a.coefficient(e));
}

TEST_CASE("a times inverse-of-a is one up to the documented validity order") {
    RS a = random_series(0, 10);
    RS inv = div(RS::constant(Rat(1)), a);
    RS prod = mul(a, inv);
    CHECK(prod.coefficient(0) == Rat(1));
    for (int e = 1; e <= prod.valid_order; ++e) CHECK(prod.coefficient(e) == Rat(0));
    CHECK(prod.valid_order >= 38);  // K=40 unit series: two orders of slack at most
}

TEST_CASE("multiplication is commutative and associative on kept coefficients") {
    RS a = random_series(-1, 8), b = random_series(2, 8), c = random_series(0, 8);
    RS ab = mul(a, b), ba = mul(b, a);
    CHECK(ab.lead == ba.lead);
    CHECK(ab.valid_order == ba.valid_order);
    for (int e = ab.first_exponent(); e <= ab.valid_order; ++e)
        CHECK(ab.coefficient(e) == ba.coefficient(e));
    RS l = mul(mul(a, b), c), r = mul(a, mul(b, c));
    int hi = std::min(l.valid_order, r.valid_order);
    for (int e = std::min(l.first_exponent(), r.first_exponent()); e <= hi; ++e)
        CHECK(l.coefficient(e) == r.coefficient(e));
}

TEST_CASE("series evaluation matches the originating rational function") {
    RS g2 = laurent_from_ratfunc(kGamma2Num, kDen, 40);
    RS g3 = laurent_from_ratfunc(kGamma3Num, kDenShifted, 40);
    auto ds2 = to_double_series(g2);
    auto ds3 = to_double_series(g3);
    for (double t : {1e-3, -1e-3, 0.01, -0.05, 0.1, 0.25, -0.3, 0.5, -0.5}) {
        double want2 = eval_ratfunc(kGamma2Num, kDen, t);
        double want3 = eval_ratfunc(kGamma3Num, kDenShifted, t);
        CHECK(testutil::rel_err(ds2.evaluate(t), want2) < 1e-8);
        CHECK(testutil::rel_err(ds3.evaluate(t), want3) < 1e-8);
    }
}

TEST_CASE("fit recovers 1/t exactly") {
    std::vector<std::pair<double, double>> samples;
    for (double t : {0.1, 0.2, 0.3}) {
        samples.push_back({t, 1.0 / t});
        samples.push_back({-t, -1.0 / t});
    }
    FitResult fit = fit_from_samples(samples, 1, 4);
    CHECK(fit.series.coefficient(-1) == Catch::Approx(1.0).margin(1e-10));
    for (int e = 0; e <= fit.series.valid_order; ++e)
        CHECK(std::abs(fit.series.coefficient(e)) < 1e-10);
    CHECK(fit.residual < 1e-12);
}

TEST_CASE("fit of gamma_2 samples matches symbolic division") {
    std::vector<std::pair<double, double>> samples;
    for (int i = 1; i <= 30; ++i) {
        double t = 0.02 + 0.23 * (i - 1) / 29.0;
        samples.push_back({t, eval_ratfunc(kGamma2Num, kDen, t)});
        samples.push_back({-t, eval_ratfunc(kGamma2Num, kDen, -t)});
    }
    FitResult fit = fit_from_samples(samples, 2, 20);
    RS exact = laurent_from_ratfunc(kGamma2Num, kDen, 40);
    // low orders to 1e-8; higher orders degrade with the fit's conditioning
    for (int e = -2; e <= 4; ++e)
        CHECK(std::abs(fit.series.coefficient(e) - to_double(exact.coefficient(e))) < 1e-8);
    for (int e = 5; e <= 6; ++e)
        CHECK(std::abs(fit.series.coefficient(e) - to_double(exact.coefficient(e))) < 1e-7);
}

TEST_CASE("fit of all-zero samples returns the zero series") {
    std::vector<std::pair<double, double>> samples{{0.1, 0.0}, {-0.1, 0.0}, {0.2, 0.0}, {-0.2, 0.0}};
    FitResult fit = fit_from_samples(samples, 1, 3);
    CHECK(fit.series.is_zero());
}

TEST_CASE("ill-conditioned fit is refused") {
    std::vector<std::pair<double, double>> samples;
    for (double t : {0.1, 0.1 + 1e-7, 0.1 + 2e-7}) {
        samples.push_back({t, 1.0 / t});
        samples.push_back({-t, -1.0 / t});
    }
    CHECK_THROWS_AS(fit_from_samples(samples, 1, 5), FitError);
}

TEST_CASE("division by the zero series is rejected") {
    RS a = random_series(0, 4);
    CHECK_THROWS_AS(div(a, RS::zero()), SeriesError);
}

TEST_CASE("antiderivative then derivative is the identity") {
    RS a = random_series(0, 9);
    RS back = derivative(antiderivative(a));
    for (int e = a.first_exponent(); e <= std::min(a.valid_order, back.valid_order); ++e)
        CHECK(back.coefficient(e) == a.coefficient(e));
    RS pole = RS::monomial(Rat(1), -1);
    CHECK_THROWS_AS(antiderivative(pole), SeriesError);
}
