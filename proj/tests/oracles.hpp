// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles, kept independent of the library's solver paths:
// finite-difference gradients, direct rank-revealing least squares, dense
// polynomial projection and Lagrange interpolation.
#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "glukit/models.hpp"

namespace oracles {

/// Centered finite-difference gradient of the MSE w.r.t. the flattened
/// parameter vector. No kink exclusion: callers pick inputs away from gate
/// boundaries.
inline Eigen::VectorXd fd_grad(const glukit::ModelParams& params, const glukit::Matrix& X,
                               const glukit::Matrix& Y, double step) {
    const Eigen::VectorXd flat = glukit::flatten(params);
    Eigen::VectorXd grad(flat.size());
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        Eigen::VectorXd plus = flat, minus = flat;
        plus[i] += step;
        minus[i] -= step;
        const double mp = glukit::mse(glukit::unflatten(params.arch, plus), X, Y);
        const double mm = glukit::mse(glukit::unflatten(params.arch, minus), X, Y);
        grad[i] = (mp - mm) / (2.0 * step);
    }
    return grad;
}

/// Minimum MSE of min_w ||A w - y||^2 via column-pivoted QR (rank revealing).
inline double least_squares_mse(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
    const Eigen::VectorXd w = A.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd r = A * w - y;
    return r.squaredNorm() / static_cast<double>(r.size());
}

/// Minimum achievable MSE when fitting only the output head (D, d) with the
/// basis frozen: least squares on [basis | 1].
inline double head_lsq_mse(const glukit::ModelParams& params, const glukit::Matrix& X,
                           const glukit::Matrix& Y) {
    const glukit::ForwardTrace t = glukit::forward_trace(params, X);
    Eigen::MatrixXd A(X.rows(), params.arch.n + 1);
    A.leftCols(params.arch.n) = t.basis;
    A.col(params.arch.n).setOnes();
    return least_squares_mse(A, Y.col(0));
}

/// RMSE of the L2-best degree-`degree` polynomial fit of (x, y), computed by
/// dense monomial normal equations.
inline double poly_projection_rmse(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                   int degree) {
    Eigen::MatrixXd A(x.size(), degree + 1);
    for (Eigen::Index r = 0; r < x.size(); ++r) {
        double p = 1.0;
        for (int c = 0; c <= degree; ++c) {
            A(r, c) = p;
            p *= x[r];
        }
    }
    return std::sqrt(least_squares_mse(A, y));
}

/// Lagrange interpolation through (xs, ys), evaluated at x.
inline double lagrange_eval(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, double x) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
        double term = ys[i];
        for (Eigen::Index j = 0; j < xs.size(); ++j) {
            if (i == j) continue;
            term *= (x - xs[j]) / (xs[i] - xs[j]);
        }
        sum += term;
    }
    return sum;
}

}  // namespace oracles
