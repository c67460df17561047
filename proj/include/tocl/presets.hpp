#pragma once

#include <map>
#include <string>
#include <vector>

#include "tocl/model.hpp"

namespace tocl {

/// 3-state polynomial benchmark: linearizable with moment exponents {0,1,3}.
inline ControlSystem preset_example3() {
    std::vector<std::string> a = {"0", "0", "-2*t*x1"};
    std::vector<std::string> b = {
        "1",
        "t - (1/3)*t^4 - 2*x1*x3 - (2*t^2 + t^3 + (1/5)*t^5)*x1^2",
        "-t^2 + t^3 + (1/5)*t^5",
    };
    // det R = 6t + 4t^3 + 4t^4 - (4/3)t^6 keeps its sign on (0, ~2.17); the
    // declared radii cover the longest optimal horizons and excursions seen in
    // practice (|x3| reaches ~2.5 on the long-horizon solutions)
    return make_control_system(3, parse_vector(a, 3), parse_vector(b, 3), 2.1, 3.0);
}

/// Chain of integrators: dx1 = u, dx_{i+1} = x_i.  No moment gaps.
inline ControlSystem preset_chain(int n) {
    std::vector<std::string> a, b;
    a.push_back("0");
    for (int i = 2; i <= n; ++i) a.push_back("x" + std::to_string(i - 1));
    b.push_back("1");
    for (int i = 2; i <= n; ++i) b.push_back("0");
    return make_control_system(n, parse_vector(a, n), parse_vector(b, n), 2.0, 2.0);
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"example3", "chain2", "chain3"};
    return names;
}

inline ControlSystem preset_by_name(const std::string& name) {
    if (name == "example3") return preset_example3();
    if (name == "chain2") return preset_chain(2);
    if (name == "chain3") return preset_chain(3);
    throw ModelError("unknown preset '" + name + "' (available: example3, chain2, chain3)");
}

}  // namespace tocl
