#pragma once

#include <fstream>
#include <string>

#include <json.hpp>  // nlohmann/json single header (vendor/)

#include "tocl/fixedpoint.hpp"
#include "tocl/linearize.hpp"
#include "tocl/sim.hpp"

namespace tocl {

inline constexpr const char* kLinearizationSchema = "tocl-linearization-report/1";
inline constexpr const char* kSolveSchema = "tocl-solve-report/1";
inline constexpr const char* kTraceSchema = "tocl-trace/1";
inline constexpr const char* kMomentSchema = "tocl-moment-report/1";

inline nlohmann::json verdict_json(const Verdict& v) {
    nlohmann::json j;
    switch (v.status) {
        case VerdictStatus::PassSymbolic: j["status"] = "pass_symbolic"; break;
        case VerdictStatus::PassNumeric: j["status"] = "pass_numeric"; break;
        case VerdictStatus::Fail: j["status"] = "fail"; break;
        case VerdictStatus::Undetermined: j["status"] = "undetermined"; break;
    }
    j["detail"] = v.detail;
    if (v.grid_points > 0) j["grid_points"] = v.grid_points;
    if (v.tolerance > 0) j["tolerance"] = v.tolerance;
    j["worst"] = v.worst;
    if (v.witness) {
        j["witness"]["t"] = v.witness->first;
        j["witness"]["x"] = v.witness->second;
    }
    return j;
}

inline nlohmann::json series_json(const LaurentSeries<double>& s,
                                  const LaurentSeries<Rat>* exact = nullptr) {
    nlohmann::json j;
    j["lead"] = s.first_exponent();
    j["valid_order"] = s.valid_order;
    nlohmann::json coeffs = nlohmann::json::array();
    for (int e = s.first_exponent(); e <= s.last_exponent(); ++e) {
        nlohmann::json c;
        c["exp"] = e;
        c["value"] = s.coefficient(e);
        if (exact) c["exact"] = rat_to_string(exact->coefficient(e));
        coeffs.push_back(c);
    }
    j["coeffs"] = coeffs;
    return j;
}

/// Per-condition verdicts plus all linearization data of a completed pipeline.
inline nlohmann::json linearization_report_json(const Linearization& lin) {
    nlohmann::json j;
    j["schema"] = kLinearizationSchema;
    j["n"] = lin.sys.n;
    j["conditions"]["brackets_vanish"] = verdict_json(lin.cond1);
    j["conditions"]["rank_R"] = verdict_json(lin.cond2);
    j["conditions"]["gamma_t_only"] = verdict_json(lin.gamma.x_independence);

    nlohmann::json c4;
    c4["status"] = lin.ind.ok() ? (lin.ind.exact ? "pass_symbolic" : "pass_numeric") : "fail";
    c4["roots"] = lin.ind.roots;
    c4["roots_complete"] = lin.ind.roots_complete;
    c4["rank_condition"] = lin.ind.satisfied_cond4;
    if (!lin.ind.failure.empty()) c4["detail"] = lin.ind.failure;
    j["conditions"]["indicial"] = c4;

    nlohmann::json c5;
    c5["status"] = lin.ind.satisfied_cond5
                       ? (lin.ind.exact ? "pass_symbolic" : "pass_numeric")
                       : "fail";
    c5["detail"] = lin.ind.satisfied_cond5
                       ? "V_{l,k_i} = 0 for l = k_i+1..k_n; fixed-point scheme applies"
                       : lin.ind.failure;
    j["conditions"]["vanishing_V"] = c5;

    if (static_cast<int>(lin.gamma.numeric.size()) == lin.sys.n) {
        for (int i = 0; i < lin.sys.n; ++i) {
            const auto* exact =
                lin.gamma.is_exact() ? &(*lin.gamma.exact)[static_cast<std::size_t>(i)] : nullptr;
            j["gamma"].push_back(
                series_json(lin.gamma.numeric[static_cast<std::size_t>(i)], exact));
        }
    }
    j["gamma_exact"] = lin.gamma.is_exact();

    nlohmann::json V = nlohmann::json::array();
    if (!lin.ind.roots.empty()) {
        long kn = lin.ind.roots.back();
        for (long k = 0; k <= kn; ++k) {
            for (long jj = 0; jj <= k; ++jj) {
                nlohmann::json entry;
                entry["k"] = k;
                entry["j"] = jj;
                entry["value"] = lin.ind.V(k, jj);
                if (lin.ind.exact) entry["exact"] = rat_to_string(lin.ind.V_exact.at({k, jj}));
                V.push_back(entry);
            }
        }
    }
    j["V"] = V;

    for (int i = 0; i < lin.df.n; ++i) {
        const auto* exact =
            lin.df.g_exact ? &(*lin.df.g_exact)[static_cast<std::size_t>(i)] : nullptr;
        j["g"].push_back(series_json(lin.df.g[static_cast<std::size_t>(i)], exact));
    }
    for (int r = 0; r < lin.df.n; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < lin.df.n; ++c) row.push_back(lin.df.L(r, c));
        j["L"].push_back(row);
    }
    return j;
}

// ---------------------------------------------------------------------------
// Solve report (versioned; round-trips through read_solve_report)
// ---------------------------------------------------------------------------

struct SolveReport {
    std::string schema = kSolveSchema;
    std::string status;  // converged | diverged | max_iter
    double c_used = 1.0;
    int iterations = 0;
    double theta = 0.0;
    int sigma = +1;
    std::vector<double> switches;
    std::vector<double> y_limit;
    double residual = 0.0;
    double tail_bound = 0.0;
    double reported_residual = 0.0;
    double driftless_terminal_error = 0.0;
    double nonlinear_terminal_error = 0.0;
    bool minimality_certified = false;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = schema;
        j["status"] = status;
        j["c_used"] = c_used;
        j["iterations"] = iterations;
        j["theta"] = theta;
        j["sigma"] = sigma;
        j["switches"] = switches;
        j["y_limit"] = y_limit;
        j["residual"] = residual;
        j["tail_bound"] = tail_bound;
        j["reported_residual"] = reported_residual;
        j["driftless_terminal_error"] = driftless_terminal_error;
        j["nonlinear_terminal_error"] = nonlinear_terminal_error;
        j["minimality_certified"] = minimality_certified;
        return j;
    }
};

inline SolveReport read_solve_report(const nlohmann::json& j) {
    if (j.value("schema", std::string()) != kSolveSchema)
        throw std::runtime_error("unsupported solve-report schema");
    SolveReport r;
    r.status = j.at("status").get<std::string>();
    r.c_used = j.at("c_used").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.theta = j.at("theta").get<double>();
    r.sigma = j.at("sigma").get<int>();
    r.switches = j.at("switches").get<std::vector<double>>();
    r.y_limit = j.at("y_limit").get<std::vector<double>>();
    r.residual = j.at("residual").get<double>();
    r.tail_bound = j.at("tail_bound").get<double>();
    r.reported_residual = j.at("reported_residual").get<double>();
    r.driftless_terminal_error = j.at("driftless_terminal_error").get<double>();
    r.nonlinear_terminal_error = j.at("nonlinear_terminal_error").get<double>();
    r.minimality_certified = j.at("minimality_certified").get<bool>();
    return r;
}

inline nlohmann::json trace_json(const FixedPointTrace& trace) {
    nlohmann::json j;
    j["schema"] = kTraceSchema;
    j["c"] = trace.c;
    j["tail_bound"] = trace.tail_bound;
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t r = 0; r + 1 < trace.iterates.size(); ++r) {
        nlohmann::json s;
        s["r"] = r;
        s["y"] = std::vector<double>(trace.iterates[r].data(),
                                     trace.iterates[r].data() + trace.iterates[r].size());
        s["residual"] = trace.residuals[r];
        s["theta"] = trace.thetas[r];
        steps.push_back(s);
    }
    j["steps"] = steps;
    const auto& last = trace.iterates.back();
    j["limit"] = std::vector<double>(last.data(), last.data() + last.size());
    return j;
}

inline nlohmann::json moment_report_json(const BangBangControl& ctrl, double residual,
                                         bool minimal, double shrink_eps) {
    nlohmann::json j;
    j["schema"] = kMomentSchema;
    j["control"]["sigma"] = ctrl.sigma;
    j["control"]["switches"] = ctrl.switches;
    j["control"]["theta"] = ctrl.theta;
    j["residual"] = residual;
    j["minimality"]["certified"] = minimal;
    j["minimality"]["shrink_eps"] = shrink_eps;
    return j;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << j.dump(2) << "\n";
}

}  // namespace tocl
