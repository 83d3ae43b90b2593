// SPDX-License-Identifier: Apache-2.0
//
// Least-squares spline baselines on uniform knots. Degree 1 uses the hat
// basis; degree 2 adds a per-segment bubble s*(h-s) on top of the hats, which
// imposes value continuity by construction and keeps the normal equations
// banded and well conditioned. Fits are direct linear least squares — the
// objective is convex, so the result is the global optimum for fixed knots.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace glukit {

struct SplineModel {
    int degree = 1;                 // 1 or 2
    Eigen::VectorXd knots;          // sorted, uniform, size >= 2
    // Per-segment polynomial in the local coordinate s = x - knots[j]:
    // value = coef(j,0) + coef(j,1)*s [+ coef(j,2)*s^2].
    Eigen::MatrixXd coef;           // (knots-1) x (degree+1)
    int dropped = 0;                // basis functions with no data support
};

/// Least-squares hat-basis fit on n_knots uniform knots over [min x, max x].
/// Empty-cell coefficients are reported in dropped and filled by neighbor
/// continuity.
SplineModel fit_linear_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n_knots);

/// C0 piecewise-quadratic least squares on uniform knots (hats + bubbles).
SplineModel fit_quadratic_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n_knots);

/// Piecewise evaluation; outside the knot range the end segment's polynomial
/// extrapolates.
Eigen::VectorXd eval_spline(const SplineModel& model, const Eigen::VectorXd& x);
double eval_spline(const SplineModel& model, double x);

double spline_rmse(const SplineModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

}  // namespace glukit
