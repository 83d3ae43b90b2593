// SPDX-License-Identifier: Apache-2.0
#include "glukit/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace glukit {

namespace {

void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}

int segment_of(const Eigen::VectorXd& knots, double x) {
    // Uniform knots; clamp so outside points use the end segments.
    const int nseg = static_cast<int>(knots.size()) - 1;
    const double h = knots[1] - knots[0];
    const int j = static_cast<int>(std::floor((x - knots[0]) / h));
    return std::clamp(j, 0, nseg - 1);
}

struct FitWork {
    Eigen::VectorXd knots;
    Eigen::VectorXd coeffs;  // knot values, then (degree 2) bubble coefficients
    int dropped = 0;
};

// Least squares in a locally supported basis: hat functions on the knots
// plus, for degree 2, one bubble s*(h-s) per segment. Value continuity is
// built into the basis. Zero-support columns are eliminated (reported via
// dropped) and filled afterwards by neighbor continuity.
FitWork fit_basis(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n_knots, int degree) {
    require(x.size() == y.size(), "spline fit: size mismatch");
    require(x.size() >= 1, "spline fit: empty data");
    require(n_knots >= 2, "spline fit: need >= 2 knots");
    require(x.allFinite() && y.allFinite(), "spline fit: non-finite data");

    const double lo = x.minCoeff(), hi = x.maxCoeff();
    require(hi > lo, "spline fit: degenerate x range");

    FitWork w;
    w.knots.resize(n_knots);
    const double h = (hi - lo) / static_cast<double>(n_knots - 1);
    for (int j = 0; j < n_knots; ++j) w.knots[j] = lo + h * j;
    w.knots[n_knots - 1] = hi;

    const int nseg = n_knots - 1;
    const int n_hat = n_knots;
    const int n_bub = degree == 2 ? nseg : 0;
    const int p = n_hat + n_bub;
    const Eigen::Index m = x.size();

    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(m, p);
    for (Eigen::Index r = 0; r < m; ++r) {
        const int j = segment_of(w.knots, x[r]);
        const double s = x[r] - w.knots[j];
        const double t = s / h;
        design(r, j) = 1.0 - t;
        design(r, j + 1) = t;
        if (degree == 2) design(r, n_hat + j) = s * (h - s);
    }

    const Eigen::MatrixXd H = design.transpose() * design;
    const Eigen::VectorXd rhs = design.transpose() * y;

    const Eigen::VectorXd diag = H.diagonal();
    const double max_diag = diag.maxCoeff();
    std::vector<int> keep;
    keep.reserve(p);
    for (int i = 0; i < p; ++i)
        if (diag[i] > 1e-12 * max_diag) keep.push_back(i);
    w.dropped = p - static_cast<int>(keep.size());

    const int pk = static_cast<int>(keep.size());
    require(pk >= 1, "spline fit: no supported basis functions");
    Eigen::MatrixXd Hk(pk, pk);
    Eigen::VectorXd rk(pk);
    for (int a = 0; a < pk; ++a) {
        rk[a] = rhs[keep[a]];
        for (int b = 0; b < pk; ++b) Hk(a, b) = H(keep[a], keep[b]);
    }
    const Eigen::VectorXd sol = Hk.ldlt().solve(rk);

    w.coeffs = Eigen::VectorXd::Zero(p);
    std::vector<bool> solved(p, false);
    for (int a = 0; a < pk; ++a) {
        w.coeffs[keep[a]] = sol[a];
        solved[keep[a]] = true;
    }

    // Unsupported knot values: linear interpolation between the nearest
    // solved neighbors (extension at the ends). Unsupported bubbles stay 0,
    // which keeps the empty segment affine.
    for (int j = 0; j < n_hat; ++j) {
        if (solved[j]) continue;
        int left = j - 1, right = j + 1;
        while (left >= 0 && !solved[left]) --left;
        while (right < n_hat && !solved[right]) ++right;
        if (left >= 0 && right < n_hat) {
            const double t = static_cast<double>(j - left) / static_cast<double>(right - left);
            w.coeffs[j] = (1.0 - t) * w.coeffs[left] + t * w.coeffs[right];
        } else if (left >= 0) {
            w.coeffs[j] = w.coeffs[left];
        } else if (right < n_hat) {
            w.coeffs[j] = w.coeffs[right];
        }
    }
    return w;
}

SplineModel to_model(const FitWork& w, int degree) {
    SplineModel model;
    model.degree = degree;
    model.knots = w.knots;
    model.dropped = w.dropped;
    const int nseg = static_cast<int>(w.knots.size()) - 1;
    const double h = w.knots[1] - w.knots[0];
    model.coef.resize(nseg, degree + 1);
    for (int j = 0; j < nseg; ++j) {
        const double vj = w.coeffs[j], vj1 = w.coeffs[j + 1];
        model.coef(j, 0) = vj;
        if (degree == 1) {
            model.coef(j, 1) = (vj1 - vj) / h;
        } else {
            const double a = w.coeffs[w.knots.size() + j];
            model.coef(j, 1) = (vj1 - vj) / h + a * h;
            model.coef(j, 2) = -a;
        }
    }
    return model;
}

}  // namespace

SplineModel fit_linear_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n_knots) {
    return to_model(fit_basis(x, y, n_knots, 1), 1);
}

SplineModel fit_quadratic_spline(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n_knots) {
    return to_model(fit_basis(x, y, n_knots, 2), 2);
}

double eval_spline(const SplineModel& model, double x) {
    const int j = segment_of(model.knots, x);
    const double s = x - model.knots[j];
    double v = model.coef(j, model.degree);
    for (int pw = model.degree - 1; pw >= 0; --pw) v = v * s + model.coef(j, pw);
    return v;
}

Eigen::VectorXd eval_spline(const SplineModel& model, const Eigen::VectorXd& x) {
    Eigen::VectorXd out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = eval_spline(model, x[i]);
    return out;
}

double spline_rmse(const SplineModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::VectorXd r = eval_spline(model, x) - y;
    return std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

}  // namespace glukit
