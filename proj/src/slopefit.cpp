// SPDX-License-Identifier: Apache-2.0
#include "glukit/slopefit.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace glukit {

SlopeFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys,
                    int min_points) {
    if (xs.size() != ys.size()) throw std::invalid_argument("fit_loglog: size mismatch");
    SlopeFit fit;

    std::vector<double> lx, ly;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "x=%g non-positive-or-nan", xs[i]);
            fit.excluded.push_back(buf);
            continue;
        }
        lx.push_back(std::log10(xs[i]));
        ly.push_back(std::log10(ys[i]));
    }
    fit.points_used = static_cast<int>(lx.size());
    if (fit.points_used < min_points) {
        fit.ok = false;
        fit.message = "no valid points";
        if (fit.points_used > 0) fit.message = "too few valid points";
        return fit;
    }

    const double n = static_cast<double>(lx.size());
    double sx = 0, sy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx <= 0.0) {
        fit.ok = false;
        fit.message = "all x identical";
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;

    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        const double pred = fit.intercept + fit.slope * lx[i];
        ss_res += (ly[i] - pred) * (ly[i] - pred);
        ss_tot += (ly[i] - my) * (ly[i] - my);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res < 1e-30 ? 1.0 : 0.0);
    fit.ok = true;
    return fit;
}

std::string slope_fit_json(const SlopeFit& fit) {
    std::ostringstream out;
    char buf[64];
    out << "{";
    std::snprintf(buf, sizeof(buf), "%.10g", fit.slope);
    out << "\"slope\": " << (fit.ok ? buf : "null") << ", ";
    std::snprintf(buf, sizeof(buf), "%.10g", fit.intercept);
    out << "\"intercept\": " << (fit.ok ? buf : "null") << ", ";
    std::snprintf(buf, sizeof(buf), "%.10g", fit.r_squared);
    out << "\"r2\": " << (fit.ok ? buf : "null") << ", ";
    out << "\"used\": " << fit.points_used << ", ";
    out << "\"excluded\": [";
    for (size_t i = 0; i < fit.excluded.size(); ++i) {
        if (i) out << ", ";
        out << "\"" << fit.excluded[i] << "\"";
    }
    out << "]}";
    return out.str();
}

}  // namespace glukit
