#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "tocl/expr.hpp"

namespace tocl {

class ModelError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Affine control system dx/dt = a(t,x) + b(t,x) u with equilibrium at x=0,
/// declared to be well behaved for |t| < t_radius, |x_i| < x_radius.
struct ControlSystem {
    int n = 0;
    VecExpr a, b;
    double t_radius = 1.0;
    double x_radius = 1.0;

    std::size_t node_budget = 200000;
};

/// Checks dimensions and the equilibrium condition a(t,0) == 0 on a t-grid.
inline ControlSystem make_control_system(int n, VecExpr a, VecExpr b, double t_radius,
                                         double x_radius) {
    if (n < 1) throw ModelError("system dimension must be positive");
    if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != n)
        throw ModelError("drift/control field dimension does not match n");
    if (!(t_radius > 0.0) || !(x_radius > 0.0))
        throw ModelError("declared radii must be positive");
    std::vector<double> origin(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k <= 32; ++k) {
        double t = -t_radius + 2.0 * t_radius * k / 32.0 * 0.999;
        for (int i = 0; i < n; ++i) {
            double v = evaluate(a[static_cast<std::size_t>(i)], t, origin);
            if (std::abs(v) > 1e-12)
                throw ModelError("a(t,0) != 0 at t=" + std::to_string(t) +
                                 " (component " + std::to_string(i + 1) + ")");
        }
    }
    return ControlSystem{n, std::move(a), std::move(b), t_radius, x_radius};
}

// ---------------------------------------------------------------------------
// The iteration operator R c = c_t + c_x a - a_x c and Lie brackets
// ---------------------------------------------------------------------------

inline VecExpr apply_R(const VecExpr& c, const ControlSystem& sys) {
    const int n = sys.n;
    if (static_cast<int>(c.size()) != n) throw ModelError("apply_R: dimension mismatch");
    VecExpr out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Expr acc = differentiate(c[static_cast<std::size_t>(i)], 0);
        for (int j = 1; j <= n; ++j) {
            acc = acc + differentiate(c[static_cast<std::size_t>(i)], j) * sys.a[static_cast<std::size_t>(j - 1)];
            acc = acc - differentiate(sys.a[static_cast<std::size_t>(i)], j) * c[static_cast<std::size_t>(j - 1)];
        }
        Expr s = simplify(acc);
        if (s.node_count() > sys.node_budget)
            throw ModelError(
                "apply_R: expression node budget exceeded; switch to the numeric route");
        out.push_back(s);
    }
    return out;
}

/// [c,d] = d_x c - c_x d.
inline VecExpr lie_bracket(const VecExpr& c, const VecExpr& d) {
    if (c.size() != d.size()) throw ModelError("lie_bracket: dimension mismatch");
    const int n = static_cast<int>(c.size());
    VecExpr out;
    out.reserve(c.size());
    for (int i = 0; i < n; ++i) {
        Expr acc = Expr::constant(0);
        for (int j = 1; j <= n; ++j) {
            acc = acc + differentiate(d[static_cast<std::size_t>(i)], j) * c[static_cast<std::size_t>(j - 1)];
            acc = acc - differentiate(c[static_cast<std::size_t>(i)], j) * d[static_cast<std::size_t>(j - 1)];
        }
        out.push_back(simplify(acc));
    }
    return out;
}

/// b, Rb, ..., R^n b and the matrix R(t,x) whose columns are the first n.
struct IteratedFields {
    std::vector<VecExpr> fields;  // fields[i] = R^i b, i = 0..n

    int n() const { return static_cast<int>(fields.empty() ? 0 : fields[0].size()); }

    const Expr& R_entry(int row, int col) const {
        return fields[static_cast<std::size_t>(col)][static_cast<std::size_t>(row)];
    }
};

inline IteratedFields build_iterated_fields(const ControlSystem& sys) {
    IteratedFields f;
    f.fields.push_back(sys.b);
    for (int i = 1; i <= sys.n; ++i) f.fields.push_back(apply_R(f.fields.back(), sys));
    return f;
}

inline Eigen::MatrixXd evaluate_R(const IteratedFields& f, double t,
                                  std::span<const double> x) {
    const int n = f.n();
    Eigen::MatrixXd R(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) R(i, j) = evaluate(f.R_entry(i, j), t, x);
    return R;
}

inline Eigen::VectorXd evaluate_field(const VecExpr& v, double t, std::span<const double> x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = evaluate(v[i], t, x);
    return out;
}

inline double det_R(const IteratedFields& f, double t, std::span<const double> x) {
    return evaluate_R(f, t, x).determinant();
}

// ---------------------------------------------------------------------------
// Deterministic certification grids (Halton) and condition verdicts
// ---------------------------------------------------------------------------

inline double halton(unsigned index, unsigned base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * (index % base);
        index /= base;
    }
    return r;
}

/// Deterministic low-discrepancy points in (-t_radius,t_radius) x (-x_radius,x_radius)^n.
/// With exclude_t_zero, |t| is kept above 2% of the radius.
inline std::vector<std::pair<double, std::vector<double>>> certification_grid(
    const ControlSystem& sys, int count, bool exclude_t_zero) {
    static const unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    std::vector<std::pair<double, std::vector<double>>> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        auto u = static_cast<unsigned>(k + 1);
        double ht = halton(u, primes[0]);
        double t = (2.0 * ht - 1.0) * 0.9 * sys.t_radius;
        if (exclude_t_zero) {
            double m = 0.02 * sys.t_radius;
            if (std::abs(t) < m) t = t >= 0 ? t + m : t - m;
        }
        std::vector<double> x(static_cast<std::size_t>(sys.n));
        for (int i = 0; i < sys.n; ++i)
            x[static_cast<std::size_t>(i)] =
                (2.0 * halton(u, primes[(i + 1) % 10]) - 1.0) * 0.9 * sys.x_radius;
        pts.push_back({t, std::move(x)});
    }
    return pts;
}

enum class VerdictStatus { PassSymbolic, PassNumeric, Fail, Undetermined };

struct Verdict {
    VerdictStatus status = VerdictStatus::Undetermined;
    std::string detail;
    int grid_points = 0;
    double tolerance = 0.0;
    double worst = 0.0;                       // worst observed magnitude / margin
    std::optional<std::pair<double, std::vector<double>>> witness;

    bool passed() const {
        return status == VerdictStatus::PassSymbolic || status == VerdictStatus::PassNumeric;
    }
};

struct CertificationOptions {
    int grid_points = 200;
    double zero_tol = 1e-9;        // |value| below this counts as zero
    double rank_rel_tol = 1e-9;    // sigma_min > tol * ||R|| counts as full rank
};

/// Condition 1: all pairwise brackets of b, Rb, ..., R^{n-1}b vanish.
/// Symbolic certificate when every component reduces to the zero rational
/// function; otherwise a numeric grid check (downgraded verdict).
inline Verdict check_brackets(const IteratedFields& f, const ControlSystem& sys,
                              const CertificationOptions& opts = {}) {
    const int n = sys.n;
    Verdict v;
    v.tolerance = opts.zero_tol;
    bool symbolic_ok = true;
    for (int i = 0; i < n && symbolic_ok; ++i) {
        for (int j = i + 1; j < n && symbolic_ok; ++j) {
            VecExpr br = lie_bracket(f.fields[static_cast<std::size_t>(i)],
                                     f.fields[static_cast<std::size_t>(j)]);
            for (const Expr& comp : br) {
                auto rf = to_multiratfunc(comp, n + 1);
                if (!rf || !rf->is_zero()) {
                    symbolic_ok = false;
                    break;
                }
            }
        }
    }
    if (symbolic_ok) {
        v.status = VerdictStatus::PassSymbolic;
        v.detail = "all brackets reduce to zero symbolically";
        return v;
    }
    // numeric fallback on the deterministic grid
    auto grid = certification_grid(sys, opts.grid_points, false);
    v.grid_points = static_cast<int>(grid.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            VecExpr br = lie_bracket(f.fields[static_cast<std::size_t>(i)],
                                     f.fields[static_cast<std::size_t>(j)]);
            for (const auto& [t, x] : grid) {
                for (const Expr& comp : br) {
                    double val = std::abs(evaluate(comp, t, x));
                    v.worst = std::max(v.worst, val);
                    if (val > opts.zero_tol) {
                        v.status = VerdictStatus::Fail;
                        v.detail = "bracket [R^" + std::to_string(i) + "b, R^" +
                                   std::to_string(j) + "b] nonzero";
                        v.witness = {{t, x}};
                        return v;
                    }
                }
            }
        }
    }
    v.status = VerdictStatus::PassNumeric;
    v.detail = "brackets vanish on the certification grid";
    return v;
}

/// Condition 2: rank R(t,x) = n away from t = 0 (grid evidence only).
inline Verdict check_rank(const IteratedFields& f, const ControlSystem& sys,
                          const CertificationOptions& opts = {}) {
    Verdict v;
    v.tolerance = opts.rank_rel_tol;
    auto grid = certification_grid(sys, opts.grid_points, true);
    v.grid_points = static_cast<int>(grid.size());
    v.worst = std::numeric_limits<double>::infinity();
    for (const auto& [t, x] : grid) {
        Eigen::MatrixXd R = evaluate_R(f, t, x);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
        double smin = svd.singularValues()(svd.singularValues().size() - 1);
        double scale = std::max(svd.singularValues()(0), 1e-300);
        v.worst = std::min(v.worst, smin / scale);
        if (!(smin > opts.rank_rel_tol * scale)) {
            v.status = VerdictStatus::Fail;
            v.detail = "R(t,x) rank-deficient (sigma_min/sigma_max = " +
                       std::to_string(smin / scale) + ")";
            v.witness = {{t, x}};
            return v;
        }
    }
    v.status = VerdictStatus::PassNumeric;
    v.detail = "R(t,x) full rank on the certification grid (t away from 0)";
    return v;
}

}  // namespace tocl
