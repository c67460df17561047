#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tocl/polynomial.hpp"
#include "tocl/rational.hpp"

namespace tocl {

class MomentError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Power moment min-problem: y_i = integral_0^theta t^{k_i} u dt, |u| <= 1,
/// theta -> min.  The control bound is fixed at 1.
struct MomentProblem {
    std::vector<long> exponents;  // strictly increasing, nonnegative
    Eigen::VectorXd target;

    void validate() const {
        if (exponents.empty() || static_cast<Eigen::Index>(exponents.size()) != target.size())
            throw MomentError("exponent/target dimension mismatch");
        for (std::size_t i = 0; i < exponents.size(); ++i) {
            if (exponents[i] < 0) throw MomentError("exponents must be nonnegative");
            if (i > 0 && exponents[i] <= exponents[i - 1])
                throw MomentError("exponents must be strictly increasing");
        }
    }
};

/// Bang-bang control: u = sigma on [0,t_1), -sigma on [t_1,t_2), ... on [0,theta].
/// Coalesced switch times encode fewer sign changes.
struct BangBangControl {
    int sigma = 1;
    std::vector<double> switches;  // ascending, within [0, theta]
    double theta = 0.0;

    /// Control value at t; right-continuous at interior switch times.
    double u_at(double t) const {
        int flips = 0;
        for (double s : switches)
            if (t >= s) ++flips;
        return (flips % 2 == 0) ? sigma : -sigma;
    }

    /// Nonempty constancy intervals [a,b] with the control value on each.
    std::vector<std::tuple<double, double, double>> pieces() const {
        std::vector<std::tuple<double, double, double>> out;
        double prev = 0.0;
        int m = 0;
        for (std::size_t j = 0; j <= switches.size(); ++j) {
            double end = j < switches.size() ? std::min(switches[j], theta) : theta;
            if (end > prev)
                out.push_back({prev, end, static_cast<double>((m % 2 == 0) ? sigma : -sigma)});
            prev = std::max(prev, end);
            ++m;
        }
        if (out.empty()) out.push_back({0.0, 0.0, static_cast<double>(sigma)});
        return out;
    }
};

/// Closed-form moments of a bang-bang control:
///   y_i = sigma * sum_m (-1)^m (t_{m+1}^{k_i+1} - t_m^{k_i+1}) / (k_i+1).
inline Eigen::VectorXd moments(const BangBangControl& ctrl, const std::vector<long>& exponents) {
    const auto n = static_cast<Eigen::Index>(exponents.size());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        long K = exponents[static_cast<std::size_t>(i)] + 1;
        double acc = 0.0, prev = 0.0;
        double sign = 1.0;
        for (std::size_t m = 0; m <= ctrl.switches.size(); ++m) {
            double hi = m < ctrl.switches.size() ? ctrl.switches[m] : ctrl.theta;
            double hp = rat_pow(hi, K);
            acc += sign * (hp - prev);
            prev = hp;
            sign = -sign;
        }
        y(i) = ctrl.sigma * acc / static_cast<double>(K);
    }
    return y;
}

struct SolveInfo {
    double residual = 0.0;
    int candidates = 0;       // distinct converged feasible solutions
    bool tie = false;         // another candidate within tie tolerance on theta
    int starts_tried = 0;
};

struct MomentOptions {
    double residual_tol = 1e-10;  // * max(1, ||y||_inf)
    double tie_rel_tol = 1e-10;
    int newton_max_iter = 80;
    std::vector<double> theta_factors = {1.0, 1.5, 2.0, 3.0};
    std::vector<double> quantiles = {0.15, 0.35, 0.5, 0.65, 0.85};
};

namespace detail {

inline Eigen::VectorXd moment_residual(const Eigen::VectorXd& params, int sigma,
                                       const std::vector<long>& k,
                                       const Eigen::VectorXd& target) {
    BangBangControl c;
    c.sigma = sigma;
    c.theta = params(params.size() - 1);
    c.switches.assign(params.data(), params.data() + params.size() - 1);
    return moments(c, k) - target;
}

inline Eigen::MatrixXd moment_jacobian(const Eigen::VectorXd& params, int sigma,
                                       const std::vector<long>& k) {
    const auto n = static_cast<Eigen::Index>(k.size());
    const Eigen::Index m = params.size();  // n-1 switches + theta
    Eigen::MatrixXd J(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        long ki = k[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j + 1 < m; ++j)
            J(i, j) = 2.0 * sigma * ((j % 2 == 0) ? 1.0 : -1.0) * rat_pow(params(j), ki);
        J(i, m - 1) = sigma * (((m - 1) % 2 == 0) ? 1.0 : -1.0) * rat_pow(params(m - 1), ki);
    }
    return J;
}

/// Clamp to the ordered cone 0 <= t_1 <= ... <= t_{n-1} <= theta.
inline void project_ordered(Eigen::VectorXd& p, double theta_cap) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) < 0.0) p(i) = 0.0;
        if (i > 0 && i + 1 < p.size() && p(i) < p(i - 1)) p(i) = p(i - 1);
    }
    Eigen::Index last = p.size() - 1;
    if (last > 0 && p(last) < p(last - 1)) p(last) = p(last - 1);
    if (p(last) > theta_cap) p(last) = theta_cap;
    for (Eigen::Index i = last - 1; i >= 0; --i)
        if (p(i) > p(last)) p(i) = p(last);
}

/// Damped Newton on the square moment system from one start; returns the
/// converged parameter vector when the residual drops below tol.
inline std::optional<Eigen::VectorXd> newton_from(const Eigen::VectorXd& start, int sigma,
                                                  const std::vector<long>& k,
                                                  const Eigen::VectorXd& y, double tol,
                                                  double theta_cap, int max_iter) {
    Eigen::VectorXd p = start;
    double r_norm = moment_residual(p, sigma, k, y).norm();
    // drive well below the acceptance tolerance so theta is tight too
    const double tol_inner = 1e-3 * tol;
    for (int it = 0; it < max_iter; ++it) {
        if (r_norm <= tol_inner) return p;
        Eigen::VectorXd r = moment_residual(p, sigma, k, y);
        Eigen::MatrixXd J = moment_jacobian(p, sigma, k);
        Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
        if (!step.allFinite()) return std::nullopt;
        double alpha = 1.0;
        Eigen::VectorXd cand;
        double cand_norm = r_norm;
        bool improved = false;
        for (int back = 0; back < 40; ++back) {
            cand = p + alpha * step;
            project_ordered(cand, theta_cap);
            cand_norm = moment_residual(cand, sigma, k, y).norm();
            if (cand_norm < r_norm * (1.0 - 1e-4 * alpha)) {
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!improved) {
            return (r_norm <= tol) ? std::optional<Eigen::VectorXd>(p) : std::nullopt;
        }
        p = cand;
        r_norm = cand_norm;
    }
    return (r_norm <= tol) ? std::optional<Eigen::VectorXd>(p) : std::nullopt;
}

/// Sorted switch-start patterns: all nondecreasing m-tuples over the quantile set.
inline std::vector<std::vector<double>> quantile_patterns(int m,
                                                          const std::vector<double>& qs) {
    std::vector<std::vector<double>> out;
    if (m == 0) {
        out.push_back({});
        return out;
    }
    std::vector<int> idx(static_cast<std::size_t>(m), 0);
    for (;;) {
        std::vector<double> pat;
        pat.reserve(static_cast<std::size_t>(m));
        for (int i : idx) pat.push_back(qs[static_cast<std::size_t>(i)]);
        out.push_back(std::move(pat));
        int pos = m - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] ==
                               static_cast<int>(qs.size()) - 1)
            --pos;
        if (pos < 0) break;
        int v = ++idx[static_cast<std::size_t>(pos)];
        for (int i = pos + 1; i < m; ++i) idx[static_cast<std::size_t>(i)] = v;
    }
    return out;
}

}  // namespace detail

/// Minimal-time bang-bang solution of the moment problem.  Damped Newton with
/// the analytic Jacobian from a multi-start grid; all feasible converged
/// solutions are collected and the smallest theta wins.
inline BangBangControl solve(const MomentProblem& p, SolveInfo* info = nullptr,
                             const MomentOptions& opts = {}) {
    p.validate();
    const int n = static_cast<int>(p.exponents.size());
    const Eigen::VectorXd& y = p.target;
    SolveInfo local;
    SolveInfo& si = info ? *info : local;

    if (y.cwiseAbs().maxCoeff() == 0.0) {
        si.residual = 0.0;
        si.candidates = 1;
        return BangBangControl{+1, std::vector<double>(static_cast<std::size_t>(n - 1), 0.0),
                               0.0};
    }

    // scale-free initial theta from |y_i| <= theta^{k_i+1}/(k_i+1)
    double theta_scale = 0.0;
    for (int i = 0; i < n; ++i) {
        long K = p.exponents[static_cast<std::size_t>(i)] + 1;
        theta_scale = std::max(theta_scale,
                               std::pow(static_cast<double>(K) * std::abs(y(i)),
                                        1.0 / static_cast<double>(K)));
    }
    const double tol = opts.residual_tol * std::max(1.0, y.cwiseAbs().maxCoeff());
    const double theta_cap = 10.0 * theta_scale * opts.theta_factors.back();

    struct Candidate {
        int sigma;
        Eigen::VectorXd params;
        double residual;
    };
    std::vector<Candidate> feasible;

    auto patterns = detail::quantile_patterns(n - 1, opts.quantiles);
    for (int sigma : {+1, -1}) {
        for (double f : opts.theta_factors) {
            double theta0 = theta_scale * f;
            for (const auto& pat : patterns) {
                Eigen::VectorXd start(n);
                for (int j = 0; j + 1 < n; ++j)
                    start(j) = pat[static_cast<std::size_t>(j)] * theta0;
                start(n - 1) = theta0;
                ++si.starts_tried;
                auto sol = detail::newton_from(start, sigma, p.exponents, y, tol, theta_cap,
                                               opts.newton_max_iter);
                if (!sol) continue;
                double res = detail::moment_residual(*sol, sigma, p.exponents, y).norm();
                // feasibility: ordering is maintained by the projection
                bool dup = false;
                for (const auto& c : feasible) {
                    if (c.sigma == sigma && (c.params - *sol).cwiseAbs().maxCoeff() < 1e-8) {
                        dup = true;
                        break;
                    }
                }
                if (!dup) feasible.push_back({sigma, *sol, res});
            }
        }
    }

    if (feasible.empty())
        throw MomentError("no feasible bang-bang solution found from any start");

    std::sort(feasible.begin(), feasible.end(), [](const Candidate& a, const Candidate& b) {
        double ta = a.params(a.params.size() - 1), tb = b.params(b.params.size() - 1);
        if (ta != tb) return ta < tb;
        // lexicographic switch tie-break
        for (Eigen::Index i = 0; i + 1 < a.params.size(); ++i)
            if (a.params(i) != b.params(i)) return a.params(i) < b.params(i);
        return a.sigma > b.sigma;
    });

    const Candidate& best = feasible.front();
    double best_theta = best.params(best.params.size() - 1);
    si.candidates = static_cast<int>(feasible.size());
    si.residual = best.residual;
    for (std::size_t i = 1; i < feasible.size(); ++i) {
        double ti = feasible[i].params(feasible[i].params.size() - 1);
        bool same_theta = std::abs(ti - best_theta) <=
                          opts.tie_rel_tol * std::max(1.0, std::abs(best_theta));
        bool same_switches =
            (feasible[i].params - best.params).cwiseAbs().maxCoeff() < 1e-7 &&
            feasible[i].sigma == best.sigma;
        if (same_theta && !same_switches) si.tie = true;
    }

    BangBangControl out;
    out.sigma = best.sigma;
    out.theta = best_theta;
    out.switches.assign(best.params.data(), best.params.data() + n - 1);
    return out;
}

/// Certifies minimality numerically: at horizon (1-eps) theta no switching
/// vector reproduces y (dense multi-start Gauss-Newton all miss).
inline bool verify_minimality(const BangBangControl& ctrl, const MomentProblem& p,
                              double shrink_eps, const MomentOptions& opts = {}) {
    p.validate();
    if (p.target.cwiseAbs().maxCoeff() == 0.0) return true;
    const int n = static_cast<int>(p.exponents.size());
    const double theta = (1.0 - shrink_eps) * ctrl.theta;
    const double feas_tol = 1e-6 * std::max(1.0, p.target.cwiseAbs().maxCoeff());

    std::vector<double> dense;
    for (int i = 0; i <= 10; ++i) dense.push_back(0.05 + 0.9 * i / 10.0);
    auto patterns = detail::quantile_patterns(n - 1, dense);

    for (int sigma : {+1, -1}) {
        for (const auto& pat : patterns) {
            Eigen::VectorXd s(n - 1);
            for (int j = 0; j + 1 < n; ++j) s(j) = pat[static_cast<std::size_t>(j)] * theta;
            // Gauss-Newton in the switches at fixed theta
            for (int it = 0; it < opts.newton_max_iter; ++it) {
                Eigen::VectorXd params(n);
                params.head(n - 1) = s;
                params(n - 1) = theta;
                Eigen::VectorXd r = detail::moment_residual(params, sigma, p.exponents,
                                                            p.target);
                if (r.norm() <= feas_tol) return false;  // shorter horizon reaches y
                Eigen::MatrixXd J = detail::moment_jacobian(params, sigma, p.exponents)
                                        .leftCols(n - 1);
                Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
                if (!step.allFinite() || step.norm() < 1e-14 * std::max(1.0, s.norm())) break;
                double alpha = 1.0;
                double rn = r.norm();
                bool improved = false;
                for (int back = 0; back < 30; ++back) {
                    Eigen::VectorXd cand = s + alpha * step;
                    std::sort(cand.data(), cand.data() + cand.size());
                    for (Eigen::Index q = 0; q < cand.size(); ++q)
                        cand(q) = std::clamp(cand(q), 0.0, theta);
                    Eigen::VectorXd cp(n);
                    cp.head(n - 1) = cand;
                    cp(n - 1) = theta;
                    if (detail::moment_residual(cp, sigma, p.exponents, p.target).norm() <
                        rn * (1.0 - 1e-4 * alpha)) {
                        s = cand;
                        improved = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if (!improved) break;
            }
        }
    }
    return true;
}

/// Direct solver for exponents (0,1,3): reduces to two degree-6 polynomials
/// in theta and picks the admissible root with 0 < t1 < t2 < theta.
inline BangBangControl solve_n3_gap(const Eigen::Vector3d& y, const MomentOptions& opts = {}) {
    if (y.cwiseAbs().maxCoeff() == 0.0) return BangBangControl{+1, {0.0, 0.0}, 0.0};
    const std::vector<long> k = {0, 1, 3};

    using P = Poly<double>;
    auto pmul = [](const P& a, const P& b) { return poly_mul(a, b); };
    auto padd = [](const P& a, const P& b) { return poly_add(a, b); };
    auto pscale = [](const P& a, double c) { return poly_scale(a, c); };

    struct Candidate {
        int sigma;
        double t1, t2, theta;
    };
    std::vector<Candidate> admissible;

    for (int s : {+1, -1}) {
        // c1 = (s y1 + theta)/2, c2 = s y2 + theta^2/2, c3 = 2 s y3 + theta^4/2
        P c1 = {0.5 * s * y(0), 0.5};
        P c2 = {s * y(1), 0.0, 0.5};
        P c3 = {2.0 * s * y(2), 0.0, 0.0, 0.0, 0.5};
        P c1sq = pmul(c1, c1);
        P h = padd(pscale(pmul(c3, c1sq), 2.0),
                   pscale(padd(pmul(pmul(c2, c2), c2), pmul(c2, pmul(c1sq, c1sq))), -1.0));
        // companion-matrix roots of h (degree 6, leading coefficient 3/32)
        poly_trim(h);
        const int deg = static_cast<int>(h.size()) - 1;
        if (deg < 1) continue;
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(deg, deg);
        for (int i = 1; i < deg; ++i) C(i, i - 1) = 1.0;
        for (int i = 0; i < deg; ++i)
            C(i, deg - 1) = -h[static_cast<std::size_t>(i)] / h[static_cast<std::size_t>(deg)];
        Eigen::EigenSolver<Eigen::MatrixXd> eig(C);
        for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
            std::complex<double> z = eig.eigenvalues()(i);
            double theta = z.real();
            if (std::abs(z.imag()) > 1e-9 * std::max(1.0, std::abs(theta)) || theta <= 0.0)
                continue;
            double c1v = 0.5 * (s * y(0) + theta);
            if (c1v <= 1e-14) continue;
            double c2v = s * y(1) + 0.5 * theta * theta;
            double sum = c2v / c1v;  // t1 + t2
            double t1 = 0.5 * (sum - c1v), t2 = 0.5 * (sum + c1v);
            double slack = 1e-12 * std::max(1.0, theta);
            if (!(t1 > slack && t2 > t1 + slack && theta > t2 + slack)) continue;
            // polish on the full moment system
            Eigen::VectorXd params(3);
            params << t1, t2, theta;
            for (int it = 0; it < 3; ++it) {
                Eigen::VectorXd r = detail::moment_residual(params, -s, k, y);
                Eigen::MatrixXd J = detail::moment_jacobian(params, -s, k);
                Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
                if (!step.allFinite()) break;
                params += step;
            }
            Eigen::VectorXd r = detail::moment_residual(params, -s, k, y);
            if (r.norm() > 1e-8 * std::max(1.0, y.cwiseAbs().maxCoeff())) continue;
            admissible.push_back({-s, params(0), params(1), params(2)});
        }
    }

    if (admissible.empty())
        throw MomentError(
            "no admissible root: target is outside the strict two-switch configuration");
    std::sort(admissible.begin(), admissible.end(),
              [](const Candidate& a, const Candidate& b) { return a.theta < b.theta; });
    const Candidate& best = admissible.front();
    (void)opts;
    return BangBangControl{best.sigma, {best.t1, best.t2}, best.theta};
}

}  // namespace tocl
