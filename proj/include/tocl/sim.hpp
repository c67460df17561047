#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "tocl/linearize.hpp"
#include "tocl/model.hpp"
#include "tocl/moment.hpp"

namespace tocl {

class SimError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sampled trajectory; switching times appear exactly as sample boundaries.
struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<double> control;  // value on the interval starting at the sample
    double terminal_error = 0.0;  // ||x(theta)||

    std::size_t size() const { return times.size(); }
};

/// Classic fixed-step RK4 on dx = (a + b u) dt, stepped piecewise between
/// switching times so each constancy interval is integrated with exact
/// endpoint alignment.  Adaptive stepping is deliberately avoided: the
/// discontinuities at the switches would defeat its error estimates.
inline Trajectory integrate(const ControlSystem& sys, const Eigen::VectorXd& x0,
                            const BangBangControl& ctrl, double step_hint = 0.0) {
    const int n = sys.n;
    if (x0.size() != n) throw SimError("integrate: x0 dimension mismatch");
    if (step_hint <= 0.0) step_hint = ctrl.theta > 0.0 ? ctrl.theta / 2000.0 : 1.0;

    Trajectory traj;
    Eigen::VectorXd x = x0;
    std::vector<double> xv(x.data(), x.data() + n);

    auto rhs = [&](double t, const Eigen::VectorXd& state, double u) {
        std::vector<double> s(state.data(), state.data() + n);
        Eigen::VectorXd dx(n);
        for (int i = 0; i < n; ++i)
            dx(i) = evaluate(sys.a[static_cast<std::size_t>(i)], t, s) +
                    evaluate(sys.b[static_cast<std::size_t>(i)], t, s) * u;
        return dx;
    };

    auto record = [&](double t, double u) {
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.control.push_back(u);
        for (int i = 0; i < n; ++i) {
            if (std::abs(x(i)) > sys.x_radius)
                throw SimError("state exited the declared neighborhood at t=" +
                               std::to_string(t));
        }
    };

    bool first = true;
    for (const auto& [lo, hi, u] : ctrl.pieces()) {
        if (first) {
            record(lo, u);
            first = false;
        }
        if (hi <= lo) continue;
        int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) / step_hint)));
        double h = (hi - lo) / steps;
        for (int s = 0; s < steps; ++s) {
            double t = lo + s * h;
            double t_next = (s + 1 == steps) ? hi : lo + (s + 1) * h;  // exact switch alignment
            double hs = t_next - t;
            Eigen::VectorXd k1 = rhs(t, x, u);
            Eigen::VectorXd k2 = rhs(t + hs / 2, x + (hs / 2) * k1, u);
            Eigen::VectorXd k3 = rhs(t + hs / 2, x + (hs / 2) * k2, u);
            Eigen::VectorXd k4 = rhs(t_next, x + hs * k3, u);
            x += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            record(t_next, u);
        }
    }
    traj.terminal_error = x.norm();
    return traj;
}

/// Driftless trajectory dz = g(t) u dt via exact piecewise antiderivatives of
/// the truncated series; samples on the same piecewise grid as integrate().
inline Trajectory integrate_driftless(const DriftlessForm& df, const Eigen::VectorXd& z0,
                                      const BangBangControl& ctrl, double step_hint = 0.0) {
    const int n = df.n;
    if (z0.size() != n) throw SimError("integrate_driftless: z0 dimension mismatch");
    if (step_hint <= 0.0) step_hint = ctrl.theta > 0.0 ? ctrl.theta / 2000.0 : 1.0;

    std::vector<LaurentSeries<double>> G;
    G.reserve(df.g.size());
    for (const auto& gi : df.g) G.push_back(antiderivative(gi));
    auto Gval = [&](double t) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = G[static_cast<std::size_t>(i)].evaluate(t);
        return v;
    };

    Trajectory traj;
    Eigen::VectorXd z = z0;
    bool first = true;
    for (const auto& [lo, hi, u] : ctrl.pieces()) {
        if (first) {
            traj.times.push_back(lo);
            traj.states.push_back(z);
            traj.control.push_back(u);
            first = false;
        }
        if (hi <= lo) continue;
        int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) / step_hint)));
        double h = (hi - lo) / steps;
        Eigen::VectorXd base = Gval(lo);
        for (int s = 1; s <= steps; ++s) {
            double t = lo + s * h;
            if (s == steps) t = hi;
            Eigen::VectorXd zt = z + u * (Gval(t) - base);
            traj.times.push_back(t);
            traj.states.push_back(zt);
            traj.control.push_back(u);
        }
        z += u * (Gval(hi) - base);
    }
    traj.terminal_error = z.norm();
    return traj;
}

/// CSV schema: header t,x1,...,xn,u; 12 significant digits per value.
inline void write_csv(const Trajectory& traj, std::ostream& os) {
    if (traj.times.empty()) throw SimError("write_csv: empty trajectory");
    const auto n = traj.states.front().size();
    os << "t";
    for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
    os << ",u\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.11e", v);
        os << buf;
    };
    for (std::size_t r = 0; r < traj.times.size(); ++r) {
        put(traj.times[r]);
        for (Eigen::Index i = 0; i < n; ++i) {
            os << ',';
            put(traj.states[r](i));
        }
        os << ',';
        put(traj.control[r]);
        os << '\n';
    }
}

inline void write_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SimError("cannot open " + path + " for writing");
    write_csv(traj, f);
}

}  // namespace tocl
