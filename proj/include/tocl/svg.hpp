#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tocl/sim.hpp"

namespace tocl {

/// Standalone SVG plot of the trajectory components versus t: one polyline
/// per component, axes with ticks, a legend, and dashed vertical lines at the
/// control switching times.  Byte-deterministic for identical inputs.
inline void emit_svg(const Trajectory& traj, std::ostream& os) {
    if (traj.times.empty()) throw SimError("emit_svg: empty trajectory");
    const int n = static_cast<int>(traj.states.front().size());

    const double W = 800, H = 500;
    const double ml = 62, mr = 150, mt = 24, mb = 46;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double t0 = traj.times.front(), t1 = traj.times.back();
    if (t1 <= t0) t1 = t0 + 1.0;
    double lo = 0.0, hi = 0.0;
    for (const auto& x : traj.states) {
        lo = std::min(lo, x.minCoeff());
        hi = std::max(hi, x.maxCoeff());
    }
    if (hi <= lo) hi = lo + 1.0;
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto px = [&](double t) { return ml + (t - t0) / (t1 - t0) * pw; };
    auto py = [&](double v) { return mt + (hi - v) / (hi - lo) * ph; };
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

    // axes
    os << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(ml + pw)
       << "\" y2=\"" << num(mt + ph) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(ml)
       << "\" y2=\"" << num(mt + ph) << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        double tv = t0 + (t1 - t0) * k / 5.0;
        double vv = lo + (hi - lo) * k / 5.0;
        os << "<line x1=\"" << num(px(tv)) << "\" y1=\"" << num(mt + ph) << "\" x2=\""
           << num(px(tv)) << "\" y2=\"" << num(mt + ph + 5) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(px(tv)) << "\" y=\"" << num(mt + ph + 18)
           << "\" font-size=\"11\" text-anchor=\"middle\">" << num(tv) << "</text>\n";
        os << "<line x1=\"" << num(ml - 5) << "\" y1=\"" << num(py(vv)) << "\" x2=\"" << num(ml)
           << "\" y2=\"" << num(py(vv)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(py(vv) + 4)
           << "\" font-size=\"11\" text-anchor=\"end\">" << num(vv) << "</text>\n";
    }
    os << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(H - 8)
       << "\" font-size=\"12\" text-anchor=\"middle\">t</text>\n";

    // switch markers: sign changes of the recorded control column
    for (std::size_t i = 1; i < traj.control.size(); ++i) {
        if (traj.control[i] != traj.control[i - 1]) {
            double ts = traj.times[i];
            os << "<line x1=\"" << num(px(ts)) << "\" y1=\"" << num(mt) << "\" x2=\""
               << num(px(ts)) << "\" y2=\"" << num(mt + ph)
               << "\" stroke=\"#888888\" stroke-dasharray=\"5,4\"/>\n";
        }
    }

    if (traj.times.size() == 1) {
        for (int c = 0; c < n; ++c)
            os << "<circle cx=\"" << num(px(traj.times[0])) << "\" cy=\""
               << num(py(traj.states[0](c))) << "\" r=\"4\" fill=\"" << palette[c % 6]
               << "\"/>\n";
    } else {
        for (int c = 0; c < n; ++c) {
            os << "<polyline fill=\"none\" stroke=\"" << palette[c % 6]
               << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < traj.times.size(); ++i) {
                if (i) os << ' ';
                os << num(px(traj.times[i])) << ',' << num(py(traj.states[i](c)));
            }
            os << "\"/>\n";
        }
    }

    // legend
    for (int c = 0; c < n; ++c) {
        double ly = mt + 16 + 18 * c;
        os << "<line x1=\"" << num(ml + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
           << num(ml + pw + 36) << "\" y2=\"" << num(ly) << "\" stroke=\"" << palette[c % 6]
           << "\" stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << num(ml + pw + 42) << "\" y=\"" << num(ly + 4)
           << "\" font-size=\"12\">x" << (c + 1) << "</text>\n";
    }
    os << "</svg>\n";
}

inline void emit_svg(const Trajectory& traj, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SimError("cannot open " + path + " for writing");
    emit_svg(traj, f);
}

}  // namespace tocl
