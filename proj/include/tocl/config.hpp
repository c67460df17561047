#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>  // nlohmann/json single header (vendor/)

#include "tocl/model.hpp"
#include "tocl/moment.hpp"
#include "tocl/presets.hpp"
#include "tocl/series.hpp"

namespace tocl {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Minimal TOML subset: [sections], key = value with strings, numbers,
// booleans and flat homogeneous arrays.  Enough for the job schema; anything
// fancier belongs in the JSON form.
// ---------------------------------------------------------------------------

namespace toml_mini {

using Value = std::variant<std::string, double, bool, std::vector<std::string>,
                           std::vector<double>>;
using Table = std::map<std::string, Value>;

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

inline Value parse_scalar(const std::string& raw, int line_no) {
    std::string s = trim(raw);
    if (s.empty()) throw ConfigError("empty value at line " + std::to_string(line_no));
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError("unterminated string at line " + std::to_string(line_no));
        return s.substr(1, s.size() - 2);
    }
    if (s == "true") return true;
    if (s == "false") return false;
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (...) {
    }
    throw ConfigError("cannot parse value '" + s + "' at line " + std::to_string(line_no));
}

inline Value parse_array(const std::string& inner, int line_no) {
    std::vector<std::string> strings;
    std::vector<double> numbers;
    bool any_string = false, any_number = false;
    std::string item;
    bool in_str = false;
    auto flush = [&]() {
        std::string s = trim(item);
        item.clear();
        if (s.empty()) return;
        Value v = parse_scalar(s, line_no);
        if (std::holds_alternative<std::string>(v)) {
            strings.push_back(std::get<std::string>(v));
            any_string = true;
        } else if (std::holds_alternative<double>(v)) {
            numbers.push_back(std::get<double>(v));
            any_number = true;
        } else {
            throw ConfigError("unsupported array element at line " + std::to_string(line_no));
        }
    };
    for (char c : inner) {
        if (c == '"') in_str = !in_str;
        if (c == ',' && !in_str) {
            flush();
            continue;
        }
        item += c;
    }
    flush();
    if (any_string && any_number)
        throw ConfigError("mixed array types at line " + std::to_string(line_no));
    if (any_string) return strings;
    return numbers;
}

/// Parses the subset into a flat table with "section.key" entries.
inline Table parse(const std::string& text) {
    Table table;
    std::istringstream is(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("malformed section header at line " + std::to_string(line_no));
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty())
                throw ConfigError("empty section name at line " + std::to_string(line_no));
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(line_no));
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        if (key.empty())
            throw ConfigError("empty key at line " + std::to_string(line_no));
        std::string full = section.empty() ? key : section + "." + key;
        if (!val.empty() && val.front() == '[') {
            if (val.back() != ']')
                throw ConfigError("unterminated array at line " + std::to_string(line_no));
            table[full] = parse_array(val.substr(1, val.size() - 2), line_no);
        } else {
            table[full] = parse_scalar(val, line_no);
        }
    }
    return table;
}

}  // namespace toml_mini

// ---------------------------------------------------------------------------
// Job configuration
// ---------------------------------------------------------------------------

struct JobConfig {
    // system: either a preset name or explicit fields
    std::optional<std::string> preset;
    int n = 0;
    std::vector<std::string> a, b;
    double t_radius = 1.0, x_radius = 1.0;

    std::string task;  // check | linearize | solve | moment | simulate
    std::vector<double> x0;
    std::string c = "1";  // relaxation factor or "auto"
    double tol = 1e-8;
    int max_iter = 300;
    int K = kDefaultTruncationOrder;

    // moment task
    std::vector<long> exponents;
    std::vector<double> y;

    // simulate task
    std::optional<BangBangControl> control;

    std::string out_dir = ".";

    ControlSystem build_system() const {
        if (preset) return preset_by_name(*preset);
        if (n < 1) throw ConfigError("system.n must be given (or use system.preset)");
        if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != n)
            throw ConfigError("system.a and system.b must each have n expressions");
        try {
            return make_control_system(n, parse_vector(a, n), parse_vector(b, n), t_radius,
                                       x_radius);
        } catch (const ParseError& err) {
            throw ConfigError(std::string("expression error: ") + err.what());
        } catch (const ModelError& err) {
            throw ConfigError(std::string("system error: ") + err.what());
        }
    }

    double relaxation_or_auto(bool* is_auto) const {
        if (c == "auto") {
            *is_auto = true;
            return 1.0;
        }
        *is_auto = false;
        try {
            std::size_t used = 0;
            double v = std::stod(c, &used);
            if (used != c.size()) throw std::invalid_argument(c);
            return v;
        } catch (...) {
            throw ConfigError("task.c must be a number in (0,1] or \"auto\"");
        }
    }
};

namespace detail {

template <class T>
std::optional<T> table_get(const toml_mini::Table& t, const std::string& key) {
    auto it = t.find(key);
    if (it == t.end()) return std::nullopt;
    if (!std::holds_alternative<T>(it->second))
        throw ConfigError("config key '" + key + "' has the wrong type");
    return std::get<T>(it->second);
}

}  // namespace detail

inline JobConfig job_from_toml(const std::string& text) {
    toml_mini::Table t = toml_mini::parse(text);
    JobConfig cfg;
    cfg.preset = detail::table_get<std::string>(t, "system.preset");
    if (auto v = detail::table_get<double>(t, "system.n")) cfg.n = static_cast<int>(*v);
    if (auto v = detail::table_get<std::vector<std::string>>(t, "system.a")) cfg.a = *v;
    if (auto v = detail::table_get<std::vector<std::string>>(t, "system.b")) cfg.b = *v;
    if (auto v = detail::table_get<double>(t, "system.t_radius")) cfg.t_radius = *v;
    if (auto v = detail::table_get<double>(t, "system.x_radius")) cfg.x_radius = *v;

    if (auto v = detail::table_get<std::string>(t, "task.kind")) cfg.task = *v;
    if (auto v = detail::table_get<std::vector<double>>(t, "task.x0")) cfg.x0 = *v;
    if (auto v = detail::table_get<std::string>(t, "task.c")) cfg.c = *v;
    if (auto v = detail::table_get<double>(t, "task.c")) cfg.c = std::to_string(*v);

    if (auto v = detail::table_get<double>(t, "tolerances.fixed_point")) cfg.tol = *v;
    if (auto v = detail::table_get<double>(t, "tolerances.max_iter"))
        cfg.max_iter = static_cast<int>(*v);
    if (auto v = detail::table_get<double>(t, "tolerances.K")) cfg.K = static_cast<int>(*v);

    if (auto v = detail::table_get<std::vector<double>>(t, "moment.exponents"))
        for (double e : *v) cfg.exponents.push_back(static_cast<long>(e));
    if (auto v = detail::table_get<std::vector<double>>(t, "moment.y")) cfg.y = *v;

    if (auto sg = detail::table_get<double>(t, "control.sigma")) {
        BangBangControl ctrl;
        ctrl.sigma = *sg >= 0 ? +1 : -1;
        if (auto sw = detail::table_get<std::vector<double>>(t, "control.switches"))
            ctrl.switches = *sw;
        if (auto th = detail::table_get<double>(t, "control.theta")) ctrl.theta = *th;
        cfg.control = ctrl;
    }

    if (auto v = detail::table_get<std::string>(t, "output.dir")) cfg.out_dir = *v;
    return cfg;
}

inline JobConfig job_from_json(const nlohmann::json& j) {
    JobConfig cfg;
    auto sys = j.value("system", nlohmann::json::object());
    if (sys.contains("preset")) cfg.preset = sys["preset"].get<std::string>();
    cfg.n = sys.value("n", 0);
    if (sys.contains("a")) cfg.a = sys["a"].get<std::vector<std::string>>();
    if (sys.contains("b")) cfg.b = sys["b"].get<std::vector<std::string>>();
    cfg.t_radius = sys.value("t_radius", 1.0);
    cfg.x_radius = sys.value("x_radius", 1.0);

    auto task = j.value("task", nlohmann::json::object());
    cfg.task = task.value("kind", std::string());
    if (task.contains("x0")) cfg.x0 = task["x0"].get<std::vector<double>>();
    if (task.contains("c")) {
        if (task["c"].is_string())
            cfg.c = task["c"].get<std::string>();
        else
            cfg.c = std::to_string(task["c"].get<double>());
    }

    auto tols = j.value("tolerances", nlohmann::json::object());
    cfg.tol = tols.value("fixed_point", 1e-8);
    cfg.max_iter = tols.value("max_iter", 300);
    cfg.K = tols.value("K", kDefaultTruncationOrder);

    auto mom = j.value("moment", nlohmann::json::object());
    if (mom.contains("exponents")) cfg.exponents = mom["exponents"].get<std::vector<long>>();
    if (mom.contains("y")) cfg.y = mom["y"].get<std::vector<double>>();

    if (j.contains("control")) {
        BangBangControl ctrl;
        ctrl.sigma = j["control"].value("sigma", 1) >= 0 ? +1 : -1;
        if (j["control"].contains("switches"))
            ctrl.switches = j["control"]["switches"].get<std::vector<double>>();
        ctrl.theta = j["control"].value("theta", 0.0);
        cfg.control = ctrl;
    }

    auto out = j.value("output", nlohmann::json::object());
    cfg.out_dir = out.value("dir", std::string("."));
    return cfg;
}

/// Loads a job from a path: JSON when the extension is .json (or the content
/// starts with '{'), the TOML subset otherwise.  "preset:NAME" shortcuts a
/// registry system with default task settings.
inline JobConfig load_job(const std::string& spec_path) {
    if (spec_path.rfind("preset:", 0) == 0) {
        JobConfig cfg;
        cfg.preset = spec_path.substr(7);
        preset_by_name(*cfg.preset);  // validate the name now
        return cfg;
    }
    std::ifstream f(spec_path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file '" + spec_path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    std::string text = ss.str();
    std::size_t first = text.find_first_not_of(" \t\r\n");
    bool looks_json = spec_path.size() > 5 && spec_path.substr(spec_path.size() - 5) == ".json";
    looks_json = looks_json || (first != std::string::npos && text[first] == '{');
    if (looks_json) {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw ConfigError("invalid JSON in '" + spec_path + "'");
        return job_from_json(j);
    }
    return job_from_toml(text);
}

}  // namespace tocl
