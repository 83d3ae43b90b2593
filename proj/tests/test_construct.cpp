// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glukit/construct.hpp"
#include "glukit/experiments.hpp"

using namespace glukit;

TEST_CASE("partition knots span the domain endpoint-inclusive") {
    PartitionSpec spec{-1.0, 1.0, 3, Orientation::uniform};
    const auto knots = spec.knots();
    REQUIRE(knots.size() == 3);
    CHECK(knots[0] == -1.0);
    CHECK(knots[1] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(knots[2] == 1.0);
}

TEST_CASE("spline_init uniform: all gates face up, knots on the grid") {
    Architecture arch{ArchKind::mlp, 1, 1, 3};
    const ModelParams p = spline_init(arch, {-1.0, 1.0, 3, Orientation::uniform}, 5);
    for (int i = 0; i < 3; ++i) CHECK(p.G(i, 0) == 1.0);
    CHECK(-p.g[0] / p.G(0, 0) == -1.0);
    CHECK(-p.g[1] / p.G(1, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(-p.g[2] / p.G(2, 0) == 1.0);
}

TEST_CASE("spline_init alternating flips odd gates but keeps the knot") {
    Architecture arch{ArchKind::glu, 1, 1, 2};
    const ModelParams p = spline_init(arch, {0.0, 1.0, 2, Orientation::alternating}, 5);
    CHECK(p.G(0, 0) == 1.0);
    CHECK(p.g[0] == 0.0);
    CHECK(p.G(1, 0) == -1.0);
    CHECK(p.g[1] == 1.0);
}

TEST_CASE("spline_init is deterministic per seed") {
    Architecture arch{ArchKind::gqu, 1, 1, 7};
    PartitionSpec spec{-1.0, 1.0, 7, Orientation::alternating};
    const Vector a = flatten(spline_init(arch, spec, 42));
    const Vector b = flatten(spline_init(arch, spec, 42));
    const Vector c = flatten(spline_init(arch, spec, 43));
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("spline_init rejects multi-dimensional input") {
    Architecture arch{ArchKind::mlp, 2, 1, 4};
    CHECK_THROWS_AS(spline_init(arch, {0.0, 1.0, 4, Orientation::uniform}, 1),
                    std::invalid_argument);
}

TEST_CASE("orientation does not change the knot set") {
    Architecture arch{ArchKind::mlp, 1, 1, 9};
    const ModelParams up = spline_init(arch, {-1.0, 1.0, 9, Orientation::uniform}, 3);
    const ModelParams alt = spline_init(arch, {-1.0, 1.0, 9, Orientation::alternating}, 3);
    CHECK(cell_boundaries_1d(up, -1.0, 1.0) == cell_boundaries_1d(alt, -1.0, 1.0));
}

TEST_CASE("construct_mlp reproduces affine targets exactly") {
    const TargetFunction lin = target_linear();
    for (int n : {1, 3, 8}) {
        const ModelParams p = construct_mlp(lin, n, 0.0, 1.0);
        CHECK(p.D(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
        for (int i = 1; i < n; ++i) CHECK(std::abs(p.D(0, i)) < 1e-12);
        CHECK(dense_grid_rmse(p, lin, 0.0, 1.0, 2001) < 1e-13);
    }
}

TEST_CASE("construct_mlp on a constant target has zero head") {
    const ModelParams p = construct_mlp(target_constant(), 5, -1.0, 1.0);
    CHECK(p.D.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(p.d[0] == 0.7);
}

TEST_CASE("construct_mlp solves the triangular knot system by hand-checked values") {
    SUBCASE("f = x^2 on [0,1], n=2") {
        TargetFunction sq;
        sq.name = "x2";
        sq.f1d = [](double x) { return x * x; };
        sq.f = [](const Eigen::RowVectorXd& x) { return x[0] * x[0]; };
        sq.d2 = [](double) { return 2.0; };
        const ModelParams p = construct_mlp(sq, 2, 0.0, 1.0);
        // y(0.5) = 0.25 and y(1) = 1 give D0 = 0.5, D1 = 1.0
        CHECK(p.D(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(p.D(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("f = 1.5 x^2 - x + 0.3 on [0,1], n=2") {
        const ModelParams p = construct_mlp(target_by_name("quadratic"), 2, 0.0, 1.0);
        // D0 = (f(0.5) - f(0)) / 0.5 = -0.25; D1 = (f(1) - y0(1)) / 0.5 = 1.5
        CHECK(p.D(0, 0) == doctest::Approx(-0.25).epsilon(1e-12));
        CHECK(p.D(0, 1) == doctest::Approx(1.5).epsilon(1e-12));
    }
}

TEST_CASE("construct_mlp interpolates the target at every knot") {
    const TargetFunction f = target_1d();
    const int n = 16;
    const double lo = -1.0, hi = 1.0, h = (hi - lo) / n;
    const ModelParams p = construct_mlp(f, n, lo, hi);
    for (int i = 0; i <= n; ++i) {
        Matrix x(1, 1);
        x << lo + i * h;
        CHECK(forward(p, x)(0, 0) == doctest::Approx(f(x(0, 0))).epsilon(1e-10));
    }
}

TEST_CASE("construct_glu is exact on quadratics for any width") {
    const TargetFunction f = target_by_name("quadratic");
    for (int n : {1, 2, 5, 16}) {
        const ModelParams p = construct_glu(f, n, 0.0, 1.0);
        CHECK(dense_grid_rmse(p, f, 0.0, 1.0, 2001) < 1e-12);
        // later cells contribute nothing once cell 0 matches the parabola
        for (int i = 1; i < n; ++i) {
            CHECK(std::abs(p.U(i, 0)) < 1e-9);
            CHECK(std::abs(p.u[i]) < 1e-9);
        }
    }
}

TEST_CASE("construct_glu on a constant target adds nothing") {
    const ModelParams p = construct_glu(target_constant(), 4, -1.0, 1.0);
    CHECK(dense_grid_rmse(p, target_constant(), -1.0, 1.0, 501) < 1e-14);
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(p.U(i, 0)) < 1e-12);
        CHECK(std::abs(p.u[i]) < 1e-12);
    }
}

TEST_CASE("construct_glu interpolates at knots and the head scale is free") {
    const TargetFunction f = target_1d();
    const int n = 12;
    const double lo = -1.0, hi = 1.0, h = (hi - lo) / n;
    const ModelParams p1 = construct_glu(f, n, lo, hi, 1.0);
    const ModelParams p2 = construct_glu(f, n, lo, hi, 2.0);
    for (int i = 0; i <= n; ++i) {
        Matrix x(1, 1);
        x << lo + i * h;
        CHECK(forward(p1, x)(0, 0) == doctest::Approx(f(x(0, 0))).epsilon(1e-10));
    }
    Matrix grid(257, 1);
    for (int i = 0; i < 257; ++i) grid(i, 0) = lo + (hi - lo) * i / 256.0;
    const Matrix y1 = forward(p1, grid), y2 = forward(p2, grid);
    for (int i = 0; i < 257; ++i)
        CHECK(y1(i, 0) == doctest::Approx(y2(i, 0)).epsilon(1e-12));
    CHECK_THROWS_AS(construct_glu(f, 4, lo, hi, 0.0), std::invalid_argument);
}

TEST_CASE("finite-difference curvature fallback tracks the analytic one") {
    TargetFunction f = target_1d();
    TargetFunction no_d2 = f;
    no_d2.d2 = nullptr;
    for (double x : {-0.7, 0.1, 0.6}) {
        const double exact = f.d2(x);
        const double fd = no_d2.second_derivative(x, 1e-4);
        CHECK(fd == doctest::Approx(exact).epsilon(1e-5));
    }
}

TEST_CASE("cell-0 midpoint residual shrinks one order faster for the glu") {
    // Targets whose governing derivative is constant, so the measured
    // exponent is clean: x^2 probes the curvature term the mlp cannot
    // cancel, x^3 probes the third-order term left after the glu's
    // curvature matching.
    TargetFunction sq;
    sq.name = "x2";
    sq.f1d = [](double x) { return x * x; };
    sq.f = [](const Eigen::RowVectorXd& x) { return x[0] * x[0]; };
    sq.d2 = [](double) { return 2.0; };
    TargetFunction cube;
    cube.name = "x3";
    cube.f1d = [](double x) { return x * x * x; };
    cube.f = [](const Eigen::RowVectorXd& x) { return x[0] * x[0] * x[0]; };
    cube.d2 = [](double x) { return 6.0 * x; };

    auto mid_residual = [&](bool glu, int n) {
        const double h = 1.0 / n;
        const ModelParams p =
            glu ? construct_glu(cube, n, 0.0, 1.0) : construct_mlp(sq, n, 0.0, 1.0);
        Matrix x(1, 1);
        x << h / 2.0;
        const double fx = glu ? cube(x(0, 0)) : sq(x(0, 0));
        return std::abs(forward(p, x)(0, 0) - fx);
    };
    auto measured_order = [&](bool glu) {
        double sum = 0.0;
        int count = 0;
        for (int n : {4, 8, 16}) {
            sum += std::log2(mid_residual(glu, n) / mid_residual(glu, 2 * n));
            ++count;
        }
        return sum / count;
    };
    CHECK(measured_order(false) == doctest::Approx(2.0).epsilon(0.15));
    CHECK(measured_order(true) == doctest::Approx(3.0).epsilon(0.10));
}

TEST_CASE("truncation orders: mlp -2, glu -3 on the smooth 1d target") {
    // The analysis lives on the unit interval; the target has period 1, so
    // [0, 1] at width n resolves it exactly as well as [-1, 1] at width 2n.
    const TargetFunction f = target_1d();
    const std::vector<int> widths{4, 8, 16, 32, 64};

    const SlopeFit mlp_fit = truncation_order_check(
        [](const TargetFunction& t, int n, double a, double b) { return construct_mlp(t, n, a, b); },
        f, widths, 0.0, 1.0);
    REQUIRE(mlp_fit.ok);
    CHECK(mlp_fit.slope > -2.15);
    CHECK(mlp_fit.slope < -1.85);

    const SlopeFit glu_fit = truncation_order_check(
        [](const TargetFunction& t, int n, double a, double b) { return construct_glu(t, n, a, b); },
        f, widths, 0.0, 1.0);
    REQUIRE(glu_fit.ok);
    CHECK(glu_fit.slope > -3.2);
    CHECK(glu_fit.slope < -2.8);

    // on the wider two-period interval the glu order is already asymptotic
    const SlopeFit glu_wide = truncation_order_check(
        [](const TargetFunction& t, int n, double a, double b) { return construct_glu(t, n, a, b); },
        f, widths, -1.0, 1.0);
    CHECK(glu_wide.slope == doctest::Approx(-3.0).epsilon(0.05));
}

TEST_CASE("truncation check reports no valid points for exactly representable targets") {
    const SlopeFit fit = truncation_order_check(
        [](const TargetFunction& t, int n, double a, double b) { return construct_mlp(t, n, a, b); },
        target_linear(), {4, 8, 16, 32}, 0.0, 1.0);
    CHECK_FALSE(fit.ok);
    CHECK(fit.points_used == 0);
    CHECK(fit.message == "no valid points");
    CHECK(fit.excluded.size() == 4);
}
