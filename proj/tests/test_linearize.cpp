#include <catch2/catch_amalgamated.hpp>

#include "tocl/linearize.hpp"
#include "tocl/presets.hpp"
#include "test_helpers.hpp"

using namespace tocl;

namespace {

// closed-form gamma of the benchmark system as rational functions of t:
//   gamma_2 = 12t(2t^2-3) / (9+6t^2+6t^3-2t^5)
//   gamma_3 = 3(3+6t^2+8t^3-4t^5) / (t (9+6t^2+6t^3-2t^5))
LaurentSeries<Rat> oracle_gamma2(int K) {
    Poly<Rat> num = {Rat(0), Rat(-36), Rat(0), Rat(24)};
    Poly<Rat> den = {Rat(9), Rat(0), Rat(6), Rat(6), Rat(0), Rat(-2)};
    return laurent_from_ratfunc(num, den, K);
}

LaurentSeries<Rat> oracle_gamma3(int K) {
    Poly<Rat> num = {Rat(9), Rat(0), Rat(18), Rat(24), Rat(0), Rat(-12)};
    Poly<Rat> den = {Rat(0), Rat(9), Rat(0), Rat(6), Rat(6), Rat(0), Rat(-2)};
    return laurent_from_ratfunc(num, den, K);
}

const Linearization& benchmark() {
    static Linearization lin = linearize_system(preset_example3());
    return lin;
}

}  // namespace

TEST_CASE("extract_gamma reproduces the benchmark gamma exactly") {
    const Linearization& lin = benchmark();
    REQUIRE(lin.gamma.is_exact());
    const auto& g = *lin.gamma.exact;

    CHECK(g[0].is_zero());

    LaurentSeries<Rat> want2 = oracle_gamma2(40);
    LaurentSeries<Rat> want3 = oracle_gamma3(40);
    CHECK(g[1].lead == 1);
    CHECK(g[2].lead == -1);
    for (int e = -3; e <= 10; ++e) {
        CHECK(g[1].coefficient(e) == want2.coefficient(e));
        CHECK(g[2].coefficient(e) == want3.coefficient(e));
    }
    CHECK(lin.gamma.x_independence.status == VerdictStatus::PassSymbolic);
}

TEST_CASE("gamma of the integrator chain is constant zero") {
    Linearization lin = linearize_system(preset_chain(3));
    REQUIRE(lin.gamma.is_exact());
    for (const auto& s : *lin.gamma.exact) CHECK(s.is_zero());
}

TEST_CASE("non-involutive systems are rejected before gamma extraction") {
    VecExpr a = parse_vector({"0", "x1"}, 2);
    VecExpr b = parse_vector({"1", "x2"}, 2);
    ControlSystem sys = make_control_system(2, a, b, 1.0, 1.0);
    try {
        linearize_system(sys);
        FAIL("expected ConditionError");
    } catch (const ConditionError& err) {
        CHECK(err.condition == "condition1");
    }
}

TEST_CASE("x-dependent gamma fails condition 3") {
    // n=1: gamma = Rb/b = -1/(1+x1), visibly x-dependent
    VecExpr a = parse_vector({"x1"}, 1);
    VecExpr b = parse_vector({"1 + x1"}, 1);
    ControlSystem sys = make_control_system(1, a, b, 1.0, 0.5);
    IteratedFields f = build_iterated_fields(sys);
    try {
        extract_gamma(sys, f);
        FAIL("expected ConditionError");
    } catch (const ConditionError& err) {
        CHECK(err.condition == "condition3");
    }
}

TEST_CASE("indicial equation of the benchmark: roots 0,1,3 and vanishing V") {
    const Linearization& lin = benchmark();
    const IndicialSolution& ind = lin.ind;
    REQUIRE(ind.roots_complete);
    CHECK(ind.exact);
    CHECK(ind.roots == std::vector<long>{0, 1, 3});
    // V_{1,0} = V_{2,0} = V_{3,0} = V_{2,1} = V_{3,1} = 0 exactly
    CHECK(ind.V_exact.at({1, 0}).is_zero());
    CHECK(ind.V_exact.at({2, 0}).is_zero());
    CHECK(ind.V_exact.at({3, 0}).is_zero());
    CHECK(ind.V_exact.at({2, 1}).is_zero());
    CHECK(ind.V_exact.at({3, 1}).is_zero());
    CHECK(ind.satisfied_cond4);
    CHECK(ind.satisfied_cond5);
    // nonzero diagonal away from the roots: V_{2,2} = 2*1*0 - 2*1 = -2
    CHECK(ind.V_exact.at({2, 2}) == Rat(-2));
}

TEST_CASE("indicial equation with zero gamma: roots 0..n-1") {
    for (int n : {2, 3}) {
        Linearization lin = linearize_system(preset_chain(n));
        REQUIRE(lin.ind.roots_complete);
        std::vector<long> want;
        for (long k = 0; k < n; ++k) want.push_back(k);
        CHECK(lin.ind.roots == want);
        CHECK(lin.ind.satisfied_cond4);
        CHECK(lin.ind.satisfied_cond5);
    }
}

TEST_CASE("driftless form of the benchmark is exact") {
    const Linearization& lin = benchmark();
    REQUIRE(lin.df.g_exact.has_value());
    const auto& g = *lin.df.g_exact;

    // g1 = -1
    CHECK(g[0].coefficient(0) == Rat(-1));
    for (int e = 1; e <= g[0].valid_order; ++e) CHECK(g[0].coefficient(e) == Rat(0));
    // g2 = -t + t^4/3
    CHECK(g[1].coefficient(1) == Rat(-1));
    CHECK(g[1].coefficient(4) == Rat(1, 3));
    for (int e = 0; e <= g[1].valid_order; ++e)
        if (e != 1 && e != 4) CHECK(g[1].coefficient(e) == Rat(0));
    // g3 = -t^3 - t^5/5
    CHECK(g[2].coefficient(3) == Rat(-1));
    CHECK(g[2].coefficient(5) == Rat(-1, 5));
    for (int e = 0; e <= g[2].valid_order; ++e)
        if (e != 3 && e != 5) CHECK(g[2].coefficient(e) == Rat(0));

    CHECK(lin.df.L.isIdentity(0.0));  // exactly I
}

TEST_CASE("driftless form with zero gamma: g_i = -t^(i-1) exactly") {
    Linearization lin = linearize_system(preset_chain(3));
    REQUIRE(lin.df.g_exact.has_value());
    for (int i = 0; i < 3; ++i) {
        const auto& gi = (*lin.df.g_exact)[static_cast<std::size_t>(i)];
        CHECK(gi.coefficient(i) == Rat(-1));
        for (int e = 0; e <= gi.valid_order; ++e)
            if (e != i) CHECK(gi.coefficient(e) == Rat(0));
    }
    CHECK(lin.df.L.isIdentity(0.0));
}

TEST_CASE("the g series satisfy the gamma ODE to machine zero") {
    CHECK(ode_residual_max(benchmark().df, benchmark().gamma) == 0.0);
    Linearization chain = linearize_system(preset_chain(3));
    CHECK(ode_residual_max(chain.df, chain.gamma) == 0.0);
}

TEST_CASE("M(x) matches the benchmark change-of-variables Jacobian") {
    const Linearization& lin = benchmark();
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd x(3);
        x << testutil::uniform(-0.5, 0.5), testutil::uniform(-0.5, 0.5),
            testutil::uniform(-0.5, 0.5);
        Eigen::MatrixXd M = m_matrix_at(lin.sys, lin.fields, lin.df, x);
        Eigen::MatrixXd want(3, 3);
        want << -1, 0, 0,
                -2 * x(0) * x(2), -1, -x(0) * x(0),
                0, 0, -1;
        CHECK((M - want).cwiseAbs().maxCoeff() < 1e-9);
    }
    // the pipeline binds the same evaluator as G0_limit
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3);
    CHECK((lin.df.G0_limit(x0) + Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
          1e-9);
}

TEST_CASE("F(0,x0) matches the closed form") {
    const Linearization& lin = benchmark();

    Eigen::VectorXd x0(3);
    x0 << -0.4, -0.2, 0.1;
    Eigen::VectorXd F = F0_at(lin.sys, lin.fields, lin.df, x0);
    CHECK(F(0) == Catch::Approx(0.4).margin(1e-8));
    CHECK(F(1) == Catch::Approx(0.184).margin(1e-8));
    CHECK(F(2) == Catch::Approx(-0.1).margin(1e-8));

    // F(0,0) = 0
    CHECK(F0_at(lin.sys, lin.fields, lin.df, Eigen::VectorXd::Zero(3)).norm() == 0.0);

    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd x(3);
        x << testutil::uniform(-0.5, 0.5), testutil::uniform(-0.5, 0.5),
            testutil::uniform(-0.5, 0.5);
        Eigen::VectorXd got = F0_at(lin.sys, lin.fields, lin.df, x);
        Eigen::VectorXd want(3);
        want << -x(0), -x(1) - x(0) * x(0) * x(2), -x(2);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("F(0,x0) is path independent") {
    const Linearization& lin = benchmark();
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd x(3);
        x << testutil::uniform(-0.5, 0.5), testutil::uniform(-0.5, 0.5),
            testutil::uniform(-0.5, 0.5);
        Eigen::VectorXd f1 = F0_at(lin.sys, lin.fields, lin.df, x, {}, {0, 1, 2});
        Eigen::VectorXd f2 = F0_at(lin.sys, lin.fields, lin.df, x, {}, {2, 0, 1});
        Eigen::VectorXd f3 = F0_at(lin.sys, lin.fields, lin.df, x, {}, {1, 2, 0});
        CHECK((f1 - f2).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((f1 - f3).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("numeric fallback route recovers the benchmark data approximately") {
    // an opaque (transcendental) term with zero coefficient forces the
    // numeric gamma route without changing the dynamics
    ControlSystem sys = preset_example3();
    ControlSystem masked = sys;
    masked.b[1] = sys.b[1] + Expr::constant(0) * Expr::sin(Expr::t());
    IteratedFields fields = build_iterated_fields(masked);
    GammaSeries gamma = extract_gamma(masked, fields);
    CHECK_FALSE(gamma.is_exact());
    CHECK(gamma.x_independence.status == VerdictStatus::PassNumeric);

    LaurentSeries<Rat> want2 = oracle_gamma2(40);
    LaurentSeries<Rat> want3 = oracle_gamma3(40);
    for (int e = -3; e <= 4; ++e) {
        CHECK(std::abs(gamma.numeric[1].coefficient(e) - to_double(want2.coefficient(e))) <
              1e-6);
        CHECK(std::abs(gamma.numeric[2].coefficient(e) - to_double(want3.coefficient(e))) <
              1e-6);
    }

    IndicialSolution ind = indicial(gamma, 3);
    REQUIRE(ind.roots_complete);
    CHECK_FALSE(ind.exact);
    CHECK(ind.roots == std::vector<long>{0, 1, 3});
    CHECK(ind.satisfied_cond4);
    CHECK(ind.satisfied_cond5);

    DriftlessForm df = build_driftless(gamma, ind);
    CHECK(std::abs(df.g[1].coefficient(4) - 1.0 / 3.0) < 1e-6);
    CHECK(std::abs(df.g[2].coefficient(5) + 1.0 / 5.0) < 1e-6);
    CHECK((df.L - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
}
