#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "tocl/config.hpp"
#include "tocl/presets.hpp"
#include "tocl/report.hpp"
#include "tocl/svg.hpp"

using namespace tocl;

namespace {

const char* kFullToml = R"(# job for the 3-state benchmark
[system]
n = 3
a = ["0", "0", "-2*t*x1"]
b = ["1", "t - (1/3)*t^4 - 2*x1*x3 - (2*t^2 + t^3 + (1/5)*t^5)*x1^2", "-t^2 + t^3 + (1/5)*t^5"]
t_radius = 2.1
x_radius = 3.0

[task]
kind = "solve"
x0 = [-0.4, -0.2, 0.1]
c = "auto"

[tolerances]
fixed_point = 1e-8
max_iter = 250
K = 40

[output]
dir = "results"   # relative to the working directory
)";

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("TOML subset: full job schema") {
    JobConfig cfg = job_from_toml(kFullToml);
    CHECK(cfg.n == 3);
    CHECK(cfg.a.size() == 3);
    CHECK(cfg.b[2] == "-t^2 + t^3 + (1/5)*t^5");
    CHECK(cfg.t_radius == 2.1);
    CHECK(cfg.task == "solve");
    CHECK(cfg.x0 == std::vector<double>{-0.4, -0.2, 0.1});
    CHECK(cfg.c == "auto");
    CHECK(cfg.tol == 1e-8);
    CHECK(cfg.max_iter == 250);
    CHECK(cfg.K == 40);
    CHECK(cfg.out_dir == "results");

    ControlSystem sys = cfg.build_system();
    CHECK(sys.n == 3);
}

TEST_CASE("TOML subset: errors carry line positions") {
    CHECK_THROWS_AS(job_from_toml("[system\nn = 3"), ConfigError);
    CHECK_THROWS_AS(job_from_toml("[system]\nn 3"), ConfigError);
    CHECK_THROWS_AS(job_from_toml("[system]\na = [1, \"x\"]"), ConfigError);
    CHECK_THROWS_AS(job_from_toml("[system]\nn = \"unterminated"), ConfigError);
}

TEST_CASE("JSON config mirrors the TOML schema") {
    nlohmann::json j = {
        {"system", {{"preset", "example3"}}},
        {"task", {{"kind", "solve"}, {"x0", {-0.4, -0.2, 0.1}}, {"c", 0.25}}},
        {"tolerances", {{"max_iter", 123}}},
        {"moment", {{"exponents", {0, 1, 3}}, {"y", {0.4, 0.1457, -0.0714}}}},
        {"output", {{"dir", "somewhere"}}},
    };
    JobConfig cfg = job_from_json(j);
    REQUIRE(cfg.preset.has_value());
    CHECK(*cfg.preset == "example3");
    CHECK(cfg.max_iter == 123);
    CHECK(cfg.exponents == std::vector<long>{0, 1, 3});
    CHECK(cfg.out_dir == "somewhere");
    bool is_auto = true;
    CHECK(cfg.relaxation_or_auto(&is_auto) == Catch::Approx(0.25));
    CHECK_FALSE(is_auto);
}

TEST_CASE("config validation catches bad inputs") {
    JobConfig cfg;
    cfg.n = 2;
    cfg.a = {"0", "0"};
    cfg.b = {"1"};
    CHECK_THROWS_AS(cfg.build_system(), ConfigError);

    cfg.b = {"1", "x7 + 1"};  // x7 exceeds n=2
    CHECK_THROWS_AS(cfg.build_system(), ConfigError);

    cfg.b = {"1", "0"};
    cfg.c = "sometimes";
    bool is_auto = false;
    CHECK_THROWS_AS(cfg.relaxation_or_auto(&is_auto), ConfigError);
}

TEST_CASE("unknown preset is rejected when loading") {
    CHECK_THROWS_AS(load_job("preset:not-a-system"), ModelError);
    JobConfig cfg = load_job("preset:chain2");
    CHECK(cfg.build_system().n == 2);
}

TEST_CASE("solve report round-trips through its own reader") {
    SolveReport r;
    r.status = "converged";
    r.c_used = 0.25;
    r.iterations = 105;
    r.theta = 2.077883946;
    r.sigma = +1;
    r.switches = {0.9842543526, 1.823196326};
    r.y_limit = {0.4, -0.1964873644, -0.3949712539};
    r.residual = 8.7e-9;
    r.tail_bound = 0.0;
    r.reported_residual = 8.7e-9;
    r.driftless_terminal_error = 3.2e-8;
    r.nonlinear_terminal_error = 3.3e-8;
    r.minimality_certified = true;

    nlohmann::json j = r.to_json();
    SolveReport back = read_solve_report(j);
    CHECK(back.status == r.status);
    CHECK(back.c_used == r.c_used);
    CHECK(back.iterations == r.iterations);
    CHECK(back.theta == r.theta);
    CHECK(back.sigma == r.sigma);
    CHECK(back.switches == r.switches);
    CHECK(back.y_limit == r.y_limit);
    CHECK(back.residual == r.residual);
    CHECK(back.minimality_certified == r.minimality_certified);
    // and writing again produces identical JSON
    CHECK(back.to_json() == j);

    nlohmann::json wrong = j;
    wrong["schema"] = "something-else/9";
    CHECK_THROWS(read_solve_report(wrong));
}

TEST_CASE("linearization report carries verdicts and exact data") {
    Linearization lin = linearize_system(preset_example3());
    nlohmann::json j = linearization_report_json(lin);
    CHECK(j["schema"] == kLinearizationSchema);
    CHECK(j["conditions"]["brackets_vanish"]["status"] == "pass_symbolic");
    CHECK(j["conditions"]["rank_R"]["status"] == "pass_numeric");
    CHECK(j["conditions"]["gamma_t_only"]["status"] == "pass_symbolic");
    CHECK(j["conditions"]["indicial"]["roots"] == nlohmann::json({0, 1, 3}));
    CHECK(j["conditions"]["vanishing_V"]["status"] == "pass_symbolic");
    CHECK(j["gamma_exact"] == true);
    // V_{1,0} is recorded as the exact rational zero
    bool found = false;
    for (const auto& entry : j["V"]) {
        if (entry["k"] == 1 && entry["j"] == 0) {
            CHECK(entry["exact"] == "0");
            found = true;
        }
    }
    CHECK(found);
    CHECK(j["g"].size() == 3);
    CHECK(j["L"][0][0] == 1.0);
    CHECK(j["L"][0][1] == 0.0);
}

TEST_CASE("trace JSON records every step") {
    FixedPointTrace trace;
    trace.c = 0.5;
    trace.iterates = {Eigen::Vector2d(1, 2), Eigen::Vector2d(1.5, 2.5),
                      Eigen::Vector2d(1.6, 2.6)};
    trace.residuals = {0.7071, 0.1414};
    trace.thetas = {0.9, 1.0};
    nlohmann::json j = trace_json(trace);
    CHECK(j["schema"] == kTraceSchema);
    REQUIRE(j["steps"].size() == 2);
    CHECK(j["steps"][1]["r"] == 1);
    CHECK(j["steps"][1]["theta"] == 1.0);
    CHECK(j["limit"] == nlohmann::json({1.6, 2.6}));
}

TEST_CASE("SVG output is byte-deterministic and matches the golden file") {
    Trajectory traj;
    traj.times = {0.0, 0.5, 1.0};
    traj.states = {Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.25, 0.5),
                   Eigen::Vector2d(0.5, 0.0)};
    traj.control = {1.0, 1.0, -1.0};

    std::ostringstream s1, s2;
    emit_svg(traj, s1);
    emit_svg(traj, s2);
    CHECK(s1.str() == s2.str());
    CHECK(s1.str().rfind("<svg", 0) == 0);
    CHECK(s1.str().find("stroke-dasharray") != std::string::npos);  // switch marker

    std::string golden = read_file(std::string(TOCL_FIXTURES) + "/golden_small.svg");
    CHECK(s1.str() == golden);
}

TEST_CASE("single-sample trajectories render as markers") {
    Trajectory traj;
    traj.times = {0.0};
    traj.states = {Eigen::Vector3d(0.1, -0.2, 0.3)};
    traj.control = {1.0};
    std::ostringstream os;
    emit_svg(traj, os);
    CHECK(os.str().find("<circle") != std::string::npos);
    CHECK(os.str().find("<polyline") == std::string::npos);
}

TEST_CASE("moment report JSON structure") {
    BangBangControl ctrl{-1, {0.125, 0.874}, 1.0977};
    nlohmann::json j = moment_report_json(ctrl, 3.9e-15, true, 0.02);
    CHECK(j["schema"] == kMomentSchema);
    CHECK(j["control"]["sigma"] == -1);
    CHECK(j["control"]["theta"] == 1.0977);
    CHECK(j["minimality"]["certified"] == true);
}
