#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "tocl/linearize.hpp"
#include "tocl/moment.hpp"

namespace tocl {

class FixedPointError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FixedPointStatus { Converged, Diverged, MaxIter };

struct FixedPointTrace {
    std::vector<Eigen::VectorXd> iterates;  // y^0, y^1, ...
    std::vector<double> residuals;          // ||y^{r+1} - y^r|| per step
    std::vector<double> thetas;             // theta(y^r) per step
    double c = 1.0;
    FixedPointStatus status = FixedPointStatus::MaxIter;
    BangBangControl final_control;
    double tail_bound = 0.0;   // truncation tail added to the reported residual
    std::string note;

    int iterations() const { return static_cast<int>(residuals.size()); }
    const Eigen::VectorXd& limit() const { return iterates.back(); }
    double reported_residual() const {
        return (residuals.empty() ? 0.0 : residuals.back()) + tail_bound;
    }
};

struct FixedPointOptions {
    double c = 1.0;
    double tol = 1e-8;
    int max_iter = 200;
    int divergence_window = 10;  // diverged when residual grows in 8 of 10 steps
    int divergence_growths = 8;
    double blowup_factor = 1e3;
    MomentOptions moment;
};

/// Closed-form integral_0^theta g(t) u(t) dt from the truncated series
/// (piecewise exact antiderivatives of g).
inline Eigen::VectorXd control_weighted_integral(const std::vector<LaurentSeries<double>>& g,
                                                 const BangBangControl& ctrl) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    std::vector<LaurentSeries<double>> G;
    G.reserve(g.size());
    for (const auto& gi : g) G.push_back(antiderivative(gi));
    for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (const auto& [a, b, u] : ctrl.pieces())
            acc += u * (G[static_cast<std::size_t>(i)].evaluate(b) -
                        G[static_cast<std::size_t>(i)].evaluate(a));
        out(i) = acc;
    }
    return out;
}

/// Bound on the neglected series tail in the integral: theta^{K+1}/(K+1) times
/// the largest coefficient magnitude near the truncation boundary (zero when
/// the computed series terminates earlier).
inline double series_tail_bound(const std::vector<LaurentSeries<double>>& g, double theta) {
    double worst = 0.0;
    for (const auto& gi : g) {
        double cb = 0.0;
        for (int e = gi.valid_order - 4; e <= gi.valid_order; ++e)
            cb = std::max(cb, std::abs(gi.coefficient(e)));
        int K = gi.valid_order;
        worst = std::max(worst, cb * rat_pow(theta, K + 1) / static_cast<double>(K + 1));
    }
    return worst;
}

namespace detail {

/// One application of the contraction map minus the identity:
/// Delta(y) = L^{-1} (F0 + integral g u(.;y)); the update is y + c Delta(y).
inline Eigen::VectorXd fixed_point_update(const DriftlessForm& df, const Eigen::VectorXd& F0,
                                          const Eigen::VectorXd& y, BangBangControl* ctrl_out,
                                          const MomentOptions& mopts) {
    MomentProblem p{df.roots, y};
    BangBangControl ctrl = solve(p, nullptr, mopts);
    Eigen::VectorXd integral = control_weighted_integral(df.g, ctrl);
    if (ctrl_out) *ctrl_out = ctrl;
    return df.L.partialPivLu().solve(F0 + integral);
}

}  // namespace detail

/// Successive approximations y^{r+1} = y^r + c L^{-1}(F0 + int g u(.;y^r)),
/// started from y^0 = L^{-1} F0.  Stops on residual < tol, on the divergence
/// heuristic (suggesting a smaller c), or at max_iter.
inline FixedPointTrace iterate_from(const DriftlessForm& df, const Eigen::VectorXd& F0,
                                    const FixedPointOptions& opts = {}) {
    if (!(opts.c > 0.0) || opts.c > 1.0)
        throw FixedPointError("relaxation factor c must lie in (0, 1]");
    FixedPointTrace trace;
    trace.c = opts.c;

    Eigen::VectorXd y = df.L.partialPivLu().solve(F0);
    trace.iterates.push_back(y);
    const double y0_norm = y.norm();

    for (int r = 0; r < opts.max_iter; ++r) {
        BangBangControl ctrl;
        Eigen::VectorXd delta = detail::fixed_point_update(df, F0, y, &ctrl, opts.moment);
        Eigen::VectorXd y_next = y + opts.c * delta;
        double residual = (y_next - y).norm();
        trace.thetas.push_back(ctrl.theta);
        trace.residuals.push_back(residual);
        trace.iterates.push_back(y_next);
        y = y_next;

        if (residual < opts.tol) {
            trace.status = FixedPointStatus::Converged;
            MomentProblem p{df.roots, y};
            trace.final_control = solve(p, nullptr, opts.moment);
            trace.tail_bound = series_tail_bound(df.g, trace.final_control.theta);
            return trace;
        }
        // blow-up guard
        if (y.norm() > opts.blowup_factor * std::max(y0_norm, 1e-12)) {
            trace.status = FixedPointStatus::Diverged;
            trace.note = "iterate norm exceeded " + std::to_string(opts.blowup_factor) +
                         " x ||y0||; retry with smaller c";
            return trace;
        }
        // growth-count heuristic over a sliding window
        const int w = opts.divergence_window;
        if (static_cast<int>(trace.residuals.size()) > w) {
            int grow = 0;
            std::size_t last = trace.residuals.size();
            for (std::size_t i = last - w; i < last; ++i)
                if (trace.residuals[i] > trace.residuals[i - 1]) ++grow;
            if (grow >= opts.divergence_growths) {
                trace.status = FixedPointStatus::Diverged;
                trace.note = "residual grew in " + std::to_string(grow) + " of the last " +
                             std::to_string(w) + " steps; retry with smaller c";
                return trace;
            }
        }
    }
    trace.status = FixedPointStatus::MaxIter;
    trace.note = "no convergence within max_iter";
    return trace;
}

/// ||y - map(y)|| = ||Delta(y)||; zero exactly at the fixed point.
inline double fixed_point_residual_from(const DriftlessForm& df, const Eigen::VectorXd& F0,
                                        const Eigen::VectorXd& y,
                                        const MomentOptions& mopts = {}) {
    return detail::fixed_point_update(df, F0, y, nullptr, mopts).norm();
}

/// Whole-pipeline entry points (Theorem-3-style gate: the vanishing condition
/// must hold before the fixed-point scheme applies).
inline FixedPointTrace iterate(const Linearization& lin, const Eigen::VectorXd& x0,
                               const FixedPointOptions& opts = {}) {
    if (!lin.ind.satisfied_cond5)
        throw ConditionError("condition5",
                             "V_{l,k_i} vanishing condition fails: the fixed-point scheme "
                             "does not apply (moment equivalence only)");
    Eigen::VectorXd F0 = F0_at(lin.sys, lin.fields, lin.df, x0);
    return iterate_from(lin.df, F0, opts);
}

inline double fixed_point_residual(const Linearization& lin, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& y, const MomentOptions& mopts = {}) {
    Eigen::VectorXd F0 = F0_at(lin.sys, lin.fields, lin.df, x0);
    return fixed_point_residual_from(lin.df, F0, y, mopts);
}

struct ScheduleResult {
    FixedPointTrace trace;
    double c_used = 1.0;
    std::vector<double> attempted;
};

/// The manual retry workflow automated: c = 1, 1/2, 1/4, 1/8 until one converges.
inline ScheduleResult iterate_auto(const Linearization& lin, const Eigen::VectorXd& x0,
                                   FixedPointOptions opts = {}) {
    ScheduleResult result;
    Eigen::VectorXd F0 = F0_at(lin.sys, lin.fields, lin.df, x0);
    if (!lin.ind.satisfied_cond5)
        throw ConditionError("condition5",
                             "V_{l,k_i} vanishing condition fails: the fixed-point scheme "
                             "does not apply (moment equivalence only)");
    for (double c : {1.0, 0.5, 0.25, 0.125}) {
        opts.c = c;
        result.attempted.push_back(c);
        result.trace = iterate_from(lin.df, F0, opts);
        result.c_used = c;
        if (result.trace.status == FixedPointStatus::Converged) return result;
        if (result.trace.status == FixedPointStatus::MaxIter) return result;
    }
    return result;
}

}  // namespace tocl
