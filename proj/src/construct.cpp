// SPDX-License-Identifier: Apache-2.0
#include "glukit/construct.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "glukit/rng.hpp"

namespace glukit {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

}  // namespace

std::vector<double> PartitionSpec::knots() const {
    require(n >= 1, "PartitionSpec: n >= 1");
    require(hi > lo, "PartitionSpec: empty domain");
    std::vector<double> result(n);
    if (n == 1) {
        result[0] = lo;
        return result;
    }
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) result[i] = lo + h * static_cast<double>(i);
    result.back() = hi;  // endpoint exact
    return result;
}

double PartitionSpec::knot_spacing() const {
    return n >= 2 ? (hi - lo) / static_cast<double>(n - 1) : (hi - lo);
}

Matrix TargetFunction::eval(const Matrix& X) const {
    Matrix out(X.rows(), 1);
    if (dim_x == 1 && f1d) {
        for (Eigen::Index r = 0; r < X.rows(); ++r) out(r, 0) = f1d(X(r, 0));
        return out;
    }
    require(static_cast<int>(X.cols()) == dim_x, "TargetFunction: X column count != dim_x");
    for (Eigen::Index r = 0; r < X.rows(); ++r) out(r, 0) = f(X.row(r));
    return out;
}

double TargetFunction::second_derivative(double x, double fd_step) const {
    if (d2) return d2(x);
    const double h = fd_step;
    return (f1d(x + h) - 2.0 * f1d(x) + f1d(x - h)) / (h * h);
}

ModelParams spline_init(const Architecture& arch, const PartitionSpec& spec, std::uint64_t seed) {
    require(arch.dim_x == 1, "spline_init supports dim_x == 1 only");
    require(arch.dim_y == 1, "spline_init supports dim_y == 1 only");
    require(arch.n == spec.n, "PartitionSpec.n must match architecture width");

    ModelParams p = zero_params(arch);
    const auto knots = spec.knots();
    for (int i = 0; i < arch.n; ++i) {
        const bool flip = spec.orientation == Orientation::alternating && (i % 2 == 1);
        const double sign = flip ? -1.0 : 1.0;
        p.G(i, 0) = sign;
        p.g[i] = -sign * knots[i];  // hinge stays at the knot
    }

    Rng rng(seed);
    auto fill_gauss = [&](Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.gaussian();
    };
    auto fill_gauss_vec = [&](Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.gaussian();
    };
    if (arch.kind != ArchKind::mlp) {
        fill_gauss(p.U);
        fill_gauss_vec(p.u);
    }
    if (arch.kind == ArchKind::gqu) {
        fill_gauss(p.Q);
        fill_gauss_vec(p.q);
    }
    fill_gauss(p.D);
    fill_gauss_vec(p.d);
    return p;
}

ModelParams construct_mlp(const TargetFunction& f, int n, double lo, double hi) {
    require(f.dim_x == 1, "construct_mlp is 1D");
    require(n >= 1, "n >= 1");
    require(hi > lo, "empty domain");

    const double h = (hi - lo) / static_cast<double>(n);
    Architecture arch{ArchKind::mlp, 1, 1, n};
    ModelParams p = zero_params(arch);
    p.d[0] = f.f1d(lo);

    for (int i = 0; i < n; ++i) {
        p.G(i, 0) = 1.0;
        p.g[i] = -(lo + h * static_cast<double>(i));
    }

    // Exactly one new neuron activates per cell; enforcing y(right knot) =
    // f(right knot) determines its coefficient by a scalar division.
    for (int i = 0; i < n; ++i) {
        const double xr = lo + h * static_cast<double>(i + 1);
        double prev = p.d[0];
        for (int j = 0; j < i; ++j) prev += p.D(0, j) * (xr - (lo + h * j));
        p.D(0, i) = (f.f1d(xr) - prev) / h;
    }
    return p;
}

ModelParams construct_glu(const TargetFunction& f, int n, double lo, double hi,
                          double head_coefficient) {
    require(f.dim_x == 1, "construct_glu is 1D");
    require(n >= 1, "n >= 1");
    require(hi > lo, "empty domain");
    require(head_coefficient != 0.0, "head coefficient must be nonzero");

    const double h = (hi - lo) / static_cast<double>(n);
    Architecture arch{ArchKind::glu, 1, 1, n};
    ModelParams p = zero_params(arch);
    p.d[0] = f.f1d(lo);

    for (int i = 0; i < n; ++i) {
        p.G(i, 0) = 1.0;
        p.g[i] = -(lo + h * static_cast<double>(i));
    }

    // Cell i adds D_i*(x - t_i)*(U_i x + u_i), a quadratic with x^2
    // coefficient D_i*U_i. Choosing the cumulative x^2 coefficient equal to
    // f''(t_i)/2 cancels the curvature term of the local truncation error;
    // u_i then enforces interpolation at the cell's right knot. D_i = 1 is
    // the remaining free scale (any nonzero choice gives the same function).
    const double fd_step = h / 100.0;
    double quad_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double ti = lo + h * static_cast<double>(i);
        const double xr = ti + h;
        const double quad_i = 0.5 * f.second_derivative(ti, fd_step) - quad_sum;
        quad_sum += quad_i;

        p.D(0, i) = head_coefficient;
        p.U(i, 0) = quad_i / head_coefficient;

        double prev = p.d[0];
        for (int j = 0; j < i; ++j)
            prev += p.D(0, j) * (xr - (lo + h * j)) * (p.U(j, 0) * xr + p.u[j]);
        p.u[i] = (f.f1d(xr) - prev) / (p.D(0, i) * h) - p.U(i, 0) * xr;
    }
    return p;
}

double dense_grid_rmse(const ModelParams& params, const TargetFunction& f, double lo, double hi,
                       int grid_points) {
    require(grid_points >= 2, "grid_points >= 2");
    Matrix X(grid_points, 1);
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (int i = 0; i < grid_points; ++i) X(i, 0) = lo + step * i;
    const Matrix Y = f.eval(X);
    return rmse(params, X, Y);
}

SlopeFit truncation_order_check(const Builder& builder, const TargetFunction& f,
                                const std::vector<int>& n_list, double lo, double hi,
                                int grid_points, double rmse_floor) {
    require(n_list.size() >= 4, "need >= 4 widths");
    require(n_list.back() >= 8 * n_list.front(), "widths must span at least 8x");

    std::vector<double> xs, ys;
    std::vector<std::string> floored;
    for (int n : n_list) {
        const ModelParams p = builder(f, n, lo, hi);
        const double err = dense_grid_rmse(p, f, lo, hi, grid_points);
        if (err < rmse_floor) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "n=%d floor-hit", n);
            floored.emplace_back(buf);
            continue;
        }
        xs.push_back(static_cast<double>(n));
        ys.push_back(err);
    }
    SlopeFit fit = fit_loglog(xs, ys, 2);
    fit.excluded.insert(fit.excluded.end(), floored.begin(), floored.end());
    if (fit.points_used == 0) {
        fit.ok = false;
        fit.message = "no valid points";
    }
    return fit;
}

}  // namespace glukit
