// Regenerates tests/fixtures/case_b.json: solves the benchmark system from
// x0 = (-0.4, 0.2, 0.1) with relaxation c = 1/4, validates minimality of the
// returned horizon with the shrink certificate and an independent brute-force
// grid scan over (t1, t2, theta), and prints the fixture JSON to stdout.

#include <cstdio>
#include <iostream>

#include "tocl/fixedpoint.hpp"
#include "tocl/presets.hpp"

using namespace tocl;

namespace {

// best exact two-switch residual at a fixed horizon, over a dense grid
// (exponent-weighted max norm so all components carry comparable scales)
double grid_margin(const std::vector<long>& k, const Eigen::VectorXd& y, double theta,
                   double h) {
    double best = 1e300;
    for (int sigma : {+1, -1}) {
        for (double t1 = 0.0; t1 <= theta; t1 += h) {
            for (double t2 = t1; t2 <= theta; t2 += h) {
                BangBangControl c{sigma, {t1, t2}, theta};
                Eigen::VectorXd r = moments(c, k) - y;
                double w = 0.0;
                for (Eigen::Index i = 0; i < r.size(); ++i)
                    w = std::max(w, std::abs(r(i)) /
                                        std::max(1.0, rat_pow(theta,
                                                              k[static_cast<std::size_t>(i)])));
                best = std::min(best, w);
            }
        }
    }
    return best;
}

}  // namespace

int main() {
    Linearization lin = linearize_system(preset_example3());
    Eigen::Vector3d x0(-0.4, 0.2, 0.1);

    FixedPointOptions opts;
    opts.c = 0.25;
    opts.max_iter = 300;
    FixedPointTrace trace = iterate(lin, x0, opts);
    if (trace.status != FixedPointStatus::Converged) {
        std::cerr << "derivation failed: fixed point did not converge (" << trace.note
                  << ")\n";
        return 1;
    }
    const BangBangControl& ctrl = trace.final_control;

    MomentProblem p{lin.df.roots, trace.limit()};
    bool minimal = verify_minimality(ctrl, p, 0.02);

    // complete candidate enumeration: every two-switch solution is a root of
    // the two degree-6 horizon polynomials, and the direct solver returns the
    // smallest admissible one
    BangBangControl direct = solve_n3_gap(trace.limit());
    bool enumeration_ok = std::abs(direct.theta - ctrl.theta) < 1e-8;

    // grid evidence: infeasible margin well below the horizon, grid-noise level at it
    double h = 2e-3;
    double margin_below = grid_margin(lin.df.roots, trace.limit(), 0.9 * ctrl.theta, h);
    double margin_at = grid_margin(lin.df.roots, trace.limit(), ctrl.theta, h);
    bool grid_ok = margin_below > 5.0 * h && margin_at < 5.0 * h &&
                   margin_below > 3.0 * margin_at;

    if (!minimal || !enumeration_ok || !grid_ok) {
        std::cerr << "derivation failed: minimality checks did not pass (certificate="
                  << minimal << ", enumeration=" << enumeration_ok << ", margins="
                  << margin_below << "/" << margin_at << ")\n";
        return 1;
    }

    std::printf("{\n");
    std::printf("  \"schema\": \"tocl-case-fixture/1\",\n");
    std::printf(
        "  \"derivation\": \"regenerate with the derive_case_b tool "
        "(tools/derive_case_b.cpp): full pipeline at x0 with c=1/4, cross-checked by the "
        "minimality certificate and a brute-force grid scan over (t1,t2,theta)\",\n");
    std::printf(
        "  \"note\": \"the triple below is the oracle-validated solution; a published "
        "rendering of this case lists the same three numbers under rotated labels "
        "(t1<t2<theta must hold)\",\n");
    std::printf("  \"x0\": [%.1f, %.1f, %.1f],\n", x0(0), x0(1), x0(2));
    std::printf("  \"c\": %.2f,\n", opts.c);
    std::printf("  \"y_limit\": [%.10g, %.10g, %.10g],\n", trace.limit()(0), trace.limit()(1),
                trace.limit()(2));
    std::printf("  \"sigma\": %d,\n", ctrl.sigma);
    std::printf("  \"t1\": %.10g,\n", ctrl.switches[0]);
    std::printf("  \"t2\": %.10g,\n", ctrl.switches[1]);
    std::printf("  \"theta\": %.10g,\n", ctrl.theta);
    std::printf("  \"iterations\": %d\n", trace.iterations());
    std::printf("}\n");
    return 0;
}
