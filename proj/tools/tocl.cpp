// tocl: time-optimal control of linearizable single-input systems.
//
// Subcommands
//   check      verify the linearizability conditions and report verdicts
//   linearize  same checks plus the full driftless-form data dump
//   solve      run the successive-approximation solver from x0
//   moment     solve a bare power-moment min-problem (exponents + target)
//   simulate   integrate the system under an explicitly given control
//
// Exit codes: 0 success, 2 condition failure, 3 divergence/solver failure,
// 4 configuration error.  TOCL_LOG=debug enables progress logging on stderr;
// TOCL_LOG=quiet silences the summary output.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "tocl/config.hpp"
#include "tocl/fixedpoint.hpp"
#include "tocl/report.hpp"
#include "tocl/svg.hpp"

namespace fs = std::filesystem;
using namespace tocl;

namespace {

enum ExitCode { kOk = 0, kUnexpected = 1, kConditionFailure = 2, kDivergence = 3, kConfig = 4 };

int log_level() {
    const char* env = std::getenv("TOCL_LOG");
    if (!env) return 1;
    std::string v(env);
    if (v == "debug") return 2;
    if (v == "quiet") return 0;
    return 1;
}

void logd(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[tocl] " << msg << "\n";
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cout << msg << "\n";
}

std::vector<double> parse_x0_flag(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError("cannot parse --x0 component '" + item + "'");
        }
    }
    return out;
}

std::string verdict_line(const std::string& name, const Verdict& v) {
    std::string s = name + ": ";
    switch (v.status) {
        case VerdictStatus::PassSymbolic: s += "pass (symbolic)"; break;
        case VerdictStatus::PassNumeric:
            s += "pass (numeric, " + std::to_string(v.grid_points) + " grid points)";
            break;
        case VerdictStatus::Fail: s += "FAIL - " + v.detail; break;
        case VerdictStatus::Undetermined: s += "undetermined"; break;
    }
    return s;
}

LinearizeOptions linearize_options(const JobConfig& cfg) {
    LinearizeOptions opts;
    opts.K = cfg.K;
    return opts;
}

int do_check(const JobConfig& cfg, const std::string& out_dir) {
    ControlSystem sys = cfg.build_system();
    logd("checking conditions for n=" + std::to_string(sys.n));
    CheckResult r = run_conditions(sys, linearize_options(cfg));

    info(verdict_line("condition 1 (brackets vanish)", r.lin.cond1));
    info(verdict_line("condition 2 (rank R = n, t != 0)", r.lin.cond2));
    info(verdict_line("condition 3 (gamma depends only on t)", r.lin.gamma.x_independence));
    if (r.lin.ind.roots_complete) {
        std::string roots = "{";
        for (std::size_t i = 0; i < r.lin.ind.roots.size(); ++i)
            roots += (i ? "," : "") + std::to_string(r.lin.ind.roots[i]);
        roots += "}";
        info("condition 4 (indicial roots " + roots + ", rank of V block): " +
             (r.cond4 ? "pass" : "FAIL - " + r.lin.ind.failure));
    } else {
        info("condition 4 (indicial equation): FAIL - " + r.lin.ind.failure);
    }
    info(std::string("vanishing condition (V_{l,k_i} = 0): ") +
         (r.cond5 ? "pass" : "FAIL - fixed-point scheme not applicable"));

    fs::create_directories(out_dir);
    write_json_file(linearization_report_json(r.lin), out_dir + "/linearization.json");
    info("wrote " + out_dir + "/linearization.json");
    return r.all_passed() ? kOk : kConditionFailure;
}

int do_solve(const JobConfig& cfg, const std::vector<double>& x0v, const std::string& c_flag,
             const std::string& out_dir) {
    ControlSystem sys = cfg.build_system();
    if (static_cast<int>(x0v.size()) != sys.n)
        throw ConfigError("x0 must have " + std::to_string(sys.n) + " components");

    CheckResult chk = run_conditions(sys, linearize_options(cfg));
    if (!chk.all_passed()) {
        fs::create_directories(out_dir);
        write_json_file(linearization_report_json(chk.lin), out_dir + "/linearization.json");
        info("condition failure: " + chk.failure + " (see " + out_dir +
             "/linearization.json)");
        return kConditionFailure;
    }
    Linearization lin = linearize_system(sys, linearize_options(cfg));

    Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(x0v.data(),
                                                           static_cast<Eigen::Index>(x0v.size()));
    JobConfig cfg_c = cfg;
    if (!c_flag.empty()) cfg_c.c = c_flag;
    bool c_auto = false;
    double c_value = cfg_c.relaxation_or_auto(&c_auto);

    FixedPointOptions fopts;
    fopts.tol = cfg.tol;
    fopts.max_iter = cfg.max_iter;

    FixedPointTrace trace;
    double c_used = c_value;
    if (c_auto) {
        logd("relaxation schedule: 1, 1/2, 1/4, 1/8");
        ScheduleResult sched = iterate_auto(lin, x0, fopts);
        trace = sched.trace;
        c_used = sched.c_used;
    } else {
        fopts.c = c_value;
        trace = iterate_from(lin.df, F0_at(lin.sys, lin.fields, lin.df, x0), fopts);
    }

    fs::create_directories(out_dir);
    write_json_file(trace_json(trace), out_dir + "/trace.json");

    SolveReport report;
    report.c_used = c_used;
    report.iterations = trace.iterations();
    report.residual = trace.residuals.empty() ? 0.0 : trace.residuals.back();
    report.tail_bound = trace.tail_bound;
    report.reported_residual = trace.reported_residual();
    report.y_limit.assign(trace.limit().data(), trace.limit().data() + trace.limit().size());

    if (trace.status != FixedPointStatus::Converged) {
        report.status = trace.status == FixedPointStatus::Diverged ? "diverged" : "max_iter";
        write_json_file(report.to_json(), out_dir + "/report.json");
        info("solver did not converge (" + trace.note + ")");
        if (!c_auto) info("hint: retry with a smaller relaxation factor, e.g. --c " +
                          std::to_string(c_used / 4.0) + " or --c auto");
        return kDivergence;
    }

    report.status = "converged";
    report.theta = trace.final_control.theta;
    report.sigma = trace.final_control.sigma;
    report.switches = trace.final_control.switches;

    // verification: steer both representations and certify minimality
    Eigen::VectorXd F0 = F0_at(lin.sys, lin.fields, lin.df, x0);
    Trajectory dl = integrate_driftless(lin.df, F0, trace.final_control);
    report.driftless_terminal_error = dl.terminal_error;
    Trajectory nl = integrate(lin.sys, x0, trace.final_control);
    report.nonlinear_terminal_error = nl.terminal_error;
    MomentProblem mp{lin.df.roots, trace.limit()};
    report.minimality_certified = verify_minimality(trace.final_control, mp, 0.02);

    write_json_file(report.to_json(), out_dir + "/report.json");
    write_csv(nl, out_dir + "/trajectory.csv");
    emit_svg(nl, out_dir + "/trajectory.svg");

    std::ostringstream sum;
    sum << "converged in " << report.iterations << " iterations (c=" << c_used << ")\n"
        << "theta = " << report.theta << ", sigma = " << report.sigma << ", switches = [";
    for (std::size_t i = 0; i < report.switches.size(); ++i)
        sum << (i ? ", " : "") << report.switches[i];
    sum << "]\n"
        << "terminal |x(theta)| = " << report.nonlinear_terminal_error
        << ", driftless |z(theta)| = " << report.driftless_terminal_error << "\n"
        << "wrote " << out_dir << "/report.json, trace.json, trajectory.csv, trajectory.svg";
    info(sum.str());
    return kOk;
}

int do_batch(const JobConfig& cfg, const std::string& batch_file, const std::string& c_flag,
             const std::string& out_dir) {
    std::ifstream f(batch_file);
    if (!f) throw ConfigError("cannot open batch file '" + batch_file + "'");
    std::vector<std::vector<double>> points;
    std::string line;
    while (std::getline(f, line)) {
        if (toml_mini::trim(line).empty()) continue;
        points.push_back(parse_x0_flag(line));
    }
    if (points.empty()) throw ConfigError("batch file has no initial conditions");

    // independent solves fan out concurrently (no shared mutable state)
    std::vector<std::future<int>> jobs;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::string sub = out_dir + "/batch_" + std::to_string(i);
        jobs.push_back(std::async(std::launch::async, [&cfg, &points, &c_flag, i, sub]() {
            try {
                return do_solve(cfg, points[i], c_flag, sub);
            } catch (const std::exception& err) {
                std::cerr << "batch job " << i << " failed: " << err.what() << "\n";
                return static_cast<int>(kUnexpected);
            }
        }));
    }
    int worst = kOk;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        int code = jobs[i].get();
        info("batch job " + std::to_string(i) + ": exit " + std::to_string(code));
        worst = std::max(worst, code);
    }
    return worst;
}

int do_moment(const JobConfig& cfg, const std::string& out_dir) {
    if (cfg.exponents.empty() || cfg.y.empty())
        throw ConfigError("moment task needs moment.exponents and moment.y");
    MomentProblem p;
    p.exponents = cfg.exponents;
    p.target = Eigen::Map<const Eigen::VectorXd>(cfg.y.data(),
                                                 static_cast<Eigen::Index>(cfg.y.size()));
    try {
        p.validate();
    } catch (const MomentError& err) {
        throw ConfigError(err.what());
    }
    SolveInfo si;
    BangBangControl ctrl = solve(p, &si);
    bool minimal = verify_minimality(ctrl, p, 0.02);
    nlohmann::json j = moment_report_json(ctrl, si.residual, minimal, 0.02);
    if (si.tie) j["tie"] = true;
    std::cout << j.dump(2) << "\n";
    fs::create_directories(out_dir);
    write_json_file(j, out_dir + "/moment.json");
    return kOk;
}

int do_simulate(const JobConfig& cfg, const std::vector<double>& x0v,
                const std::string& out_dir) {
    ControlSystem sys = cfg.build_system();
    if (!cfg.control) throw ConfigError("simulate task needs a [control] section");
    if (static_cast<int>(x0v.size()) != sys.n)
        throw ConfigError("x0 must have " + std::to_string(sys.n) + " components");
    Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(x0v.data(),
                                                           static_cast<Eigen::Index>(x0v.size()));
    Trajectory traj = integrate(sys, x0, *cfg.control);
    fs::create_directories(out_dir);
    write_csv(traj, out_dir + "/trajectory.csv");
    emit_svg(traj, out_dir + "/trajectory.svg");
    info("terminal |x(theta)| = " + std::to_string(traj.terminal_error));
    info("wrote " + out_dir + "/trajectory.csv, trajectory.svg");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-optimal control for nonlinear linearizable single-input systems"};
    app.require_subcommand(1);

    std::string config_path, x0_flag, c_flag, out_flag, batch_file;

    auto add_common = [&](CLI::App* sub, bool with_solver_flags) {
        sub->add_option("--config", config_path, "job config (TOML or JSON), or preset:NAME")
            ->required();
        sub->add_option("--out", out_flag, "output directory (default from config)");
        if (with_solver_flags) {
            sub->add_option("--x0", x0_flag, "initial state, comma separated");
            sub->add_option("--c", c_flag, "relaxation factor in (0,1] or 'auto'");
        }
    };

    CLI::App* cmd_check = app.add_subcommand("check", "verify linearizability conditions");
    add_common(cmd_check, false);
    CLI::App* cmd_linearize =
        app.add_subcommand("linearize", "conditions plus the driftless-form data");
    add_common(cmd_linearize, false);
    CLI::App* cmd_solve = app.add_subcommand("solve", "run the time-optimal solver");
    add_common(cmd_solve, true);
    cmd_solve->add_option("--batch", batch_file, "file with one x0 per line; solves fan out");
    CLI::App* cmd_moment = app.add_subcommand("moment", "solve a power-moment min-problem");
    add_common(cmd_moment, false);
    CLI::App* cmd_simulate =
        app.add_subcommand("simulate", "integrate the system under a given control");
    add_common(cmd_simulate, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        JobConfig cfg = load_job(config_path);
        std::string out_dir = !out_flag.empty() ? out_flag
                              : cfg.out_dir.empty() ? std::string(".") : cfg.out_dir;
        std::vector<double> x0 = !x0_flag.empty() ? parse_x0_flag(x0_flag) : cfg.x0;

        if (app.got_subcommand(cmd_check) || app.got_subcommand(cmd_linearize))
            return do_check(cfg, out_dir);
        if (app.got_subcommand(cmd_solve)) {
            if (!batch_file.empty()) return do_batch(cfg, batch_file, c_flag, out_dir);
            return do_solve(cfg, x0, c_flag, out_dir);
        }
        if (app.got_subcommand(cmd_moment)) return do_moment(cfg, out_dir);
        if (app.got_subcommand(cmd_simulate)) return do_simulate(cfg, x0, out_dir);
        return kConfig;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kConfig;
    } catch (const ParseError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kConfig;
    } catch (const ConditionError& err) {
        std::cerr << "condition failure: " << err.what() << "\n";
        return kConditionFailure;
    } catch (const MomentError& err) {
        std::cerr << "solver failure: " << err.what() << "\n";
        return kDivergence;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kUnexpected;
    }
}
