// SPDX-License-Identifier: Apache-2.0
//
// Analytical spline-style parameter constructions (1D). Both builders place
// uniform gate knots and solve one new neuron per cell, left to right, so the
// model interpolates the target at every knot. The GLU builder additionally
// matches the target's curvature at each cell's left knot, which buys one
// extra order of accuracy.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "glukit/models.hpp"
#include "glukit/slopefit.hpp"

namespace glukit {

enum class Orientation { uniform, alternating };

// Uniform knot layout for gate initialization: n knots spanning [lo, hi]
// endpoint-inclusive (single knot at lo when n == 1). Alternating orientation
// flips the sign of (G_i, g_i) for odd i; the knot stays put but the gate
// opens the other way, which keeps every neuron live on part of the domain.
struct PartitionSpec {
    double lo = 0.0;
    double hi = 1.0;
    int n = 1;
    Orientation orientation = Orientation::uniform;

    std::vector<double> knots() const;
    double knot_spacing() const;  // (hi-lo)/(n-1) for n >= 2, else hi-lo
};

// Scalar target with optional analytic derivatives. When d2 is absent the
// GLU builder falls back to a centered second difference.
struct TargetFunction {
    std::string name;
    int dim_x = 1;
    int dim_y = 1;
    std::function<double(const Eigen::RowVectorXd&)> f;
    std::function<double(double)> f1d;  // required when dim_x == 1
    std::function<double(double)> d1;   // optional
    std::function<double(double)> d2;   // optional

    double operator()(double x) const { return f1d(x); }
    Matrix eval(const Matrix& X) const;
    double second_derivative(double x, double fd_step) const;
};

/// Gate knots per spec; U, u, Q, q, D, d i.i.d. standard normal from seed.
/// 1D only.
ModelParams spline_init(const Architecture& arch, const PartitionSpec& spec, std::uint64_t seed);

/// Piecewise-linear interpolant of f on cells of width (hi-lo)/n.
/// The result matches f at every cell boundary lo + i*(hi-lo)/n, i = 0..n.
ModelParams construct_mlp(const TargetFunction& f, int n, double lo, double hi);

/// Piecewise-quadratic construction: knot interpolation plus curvature
/// matching (cumulative x^2 coefficient equals f''(left knot)/2 per cell).
/// head_coefficient is the leftover free scale per neuron (must be nonzero;
/// any choice yields the same function).
ModelParams construct_glu(const TargetFunction& f, int n, double lo, double hi,
                          double head_coefficient = 1.0);

using Builder = std::function<ModelParams(const TargetFunction&, int, double, double)>;

/// Dense-grid RMSE of builder(f, n) per n, then a log-log slope fit.
/// Points with RMSE below rmse_floor are excluded and reported.
SlopeFit truncation_order_check(const Builder& builder, const TargetFunction& f,
                                const std::vector<int>& n_list, double lo, double hi,
                                int grid_points = 10001, double rmse_floor = 1e-13);

/// RMSE of params against f on a dense uniform grid over [lo, hi].
double dense_grid_rmse(const ModelParams& params, const TargetFunction& f, double lo, double hi,
                       int grid_points = 10001);

}  // namespace glukit
