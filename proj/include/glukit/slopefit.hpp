// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace glukit {

// Log-log least-squares fit of y = C * x^slope.
struct SlopeFit {
    bool ok = false;
    double slope = 0.0;
    double intercept = 0.0;  // log10 C
    double r_squared = 0.0;
    int points_used = 0;
    std::vector<std::string> excluded;  // "x=<..> reason" entries
    std::string message;
};

/// OLS on (log10 x, log10 y). Caller filters points; pairs with y <= 0 are
/// rejected here. min_points gates ok.
SlopeFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys,
                    int min_points = 2);

std::string slope_fit_json(const SlopeFit& fit);

}  // namespace glukit
