// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glukit/construct.hpp"
#include "glukit/experiments.hpp"
#include "glukit/rng.hpp"
#include "glukit/train.hpp"
#include "oracles.hpp"

using namespace glukit;

namespace {

ModelParams random_params(const Architecture& arch, std::uint64_t seed) {
    Rng rng(seed);
    Vector flat(param_count(arch));
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = rng.gaussian();
    return unflatten(arch, flat);
}

Matrix uniform_inputs(int m, int dim, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Matrix X(m, dim);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < dim; ++c) X(r, c) = rng.uniform(lo, hi);
    return X;
}

}  // namespace

TEST_CASE("block get/set round-trips and matches the flatten layout") {
    for (ArchKind kind : {ArchKind::mlp, ArchKind::glu, ArchKind::gqu}) {
        const Architecture arch{kind, 2, 2, 3};
        const ModelParams p = random_params(arch, 17);
        int total = 0;
        ModelParams copy = zero_params(arch);
        for (Block b : applicable_blocks(arch)) {
            const Vector v = get_block(p, b);
            CHECK(static_cast<int>(v.size()) == block_param_count(arch, b));
            set_block(copy, b, v);
            total += static_cast<int>(v.size());
        }
        CHECK(total == param_count(arch));
        CHECK(flatten(copy) == flatten(p));
    }
}

TEST_CASE("block jacobians agree with the analytic gradient identity") {
    // grad(MSE) restricted to a block equals (2/N) J^T r.
    for (ArchKind kind : {ArchKind::mlp, ArchKind::glu, ArchKind::gqu}) {
        const Architecture arch{kind, 2, 2, 4};
        const ModelParams p = random_params(arch, 23);
        const Matrix X = uniform_inputs(30, 2, 24);
        Matrix Y = forward(p, X);
        Y.array() += 0.7;
        const ForwardTrace trace = forward_trace(p, X);
        const ModelParams full_grad = unflatten(arch, grad_params(p, X, Y));

        Vector r(Y.size());
        Eigen::Index at = 0;
        const Matrix R = trace.out - Y;
        for (Eigen::Index i = 0; i < R.rows(); ++i)
            for (Eigen::Index k = 0; k < R.cols(); ++k) r[at++] = R(i, k);

        for (Block b : applicable_blocks(arch)) {
            const Matrix J = block_jacobian(p, trace, X, b);
            const Vector via_j = (2.0 / static_cast<double>(Y.size())) * (J.transpose() * r);
            const Vector direct = get_block(full_grad, b);
            CHECK((via_j - direct).lpNorm<Eigen::Infinity>() <
                  1e-12 * std::max(1.0, direct.lpNorm<Eigen::Infinity>()));
        }
    }
}

TEST_CASE("one head step reaches the convex-subproblem optimum") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const Architecture arch{ArchKind::mlp, 1, 1, 6};
        const ModelParams p = random_params(arch, seed);
        const Matrix X = uniform_inputs(80, 1, seed + 50);
        Rng rng(seed + 99);
        Matrix Y(80, 1);
        for (int i = 0; i < 80; ++i) Y(i, 0) = std::sin(2.0 * X(i, 0)) + 0.1 * rng.gaussian();

        TrainConfig config;
        const StepResult step = newton_step_block(p, Block::head, X, Y, config, 1e-10);
        REQUIRE(step.report.accepted);
        const double direct = oracles::head_lsq_mse(p, X, Y);
        CHECK(step.report.mse_after ==
              doctest::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("zero-residual start produces a zero step") {
    const Architecture arch{ArchKind::glu, 1, 1, 4};
    const ModelParams p = random_params(arch, 5);
    const Matrix X = uniform_inputs(40, 1, 6);
    const Matrix Y = forward(p, X);
    TrainConfig config;
    const StepResult step = newton_step_block(p, Block::head, X, Y, config, 1e-10);
    CHECK_FALSE(step.report.accepted);
    CHECK(step.report.zero_direction);
    CHECK(step.report.mse_after == step.report.mse_before);
    CHECK(flatten(step.params) == flatten(p));
}

TEST_CASE("dead neurons are eliminated and left untouched") {
    ModelParams p = zero_params({ArchKind::mlp, 1, 1, 3});
    p.G << 1, 1, 1;
    p.g << 0.2, -10.0, -0.1;  // neuron 1 closed on [-1, 1]
    p.D << 0.5, 0.25, -0.3;
    p.d[0] = 0.1;
    const Matrix X = uniform_inputs(60, 1, 7);
    Matrix Y(60, 1);
    for (int i = 0; i < 60; ++i) Y(i, 0) = std::cos(X(i, 0));

    TrainConfig config;
    const StepResult step = newton_step_block(p, Block::head, X, Y, config, 1e-10);
    REQUIRE(step.report.accepted);
    CHECK(step.report.eliminated == 1);
    CHECK(step.params.D(0, 1) == p.D(0, 1));  // exact: no update at all
    CHECK(step.params.D(0, 0) != p.D(0, 0));

    const StepResult gates = newton_step_block(p, Block::gates, X, Y, config, 1e-10);
    CHECK(gates.report.eliminated == 2);  // dead neuron's (G, g)
    CHECK(gates.params.G(1, 0) == p.G(1, 0));
    CHECK(gates.params.g[1] == p.g[1]);
}

TEST_CASE("train: loss trace is monotone and runs are bit-deterministic") {
    const Architecture arch{ArchKind::glu, 1, 1, 6};
    PartitionSpec spec{-1.0, 1.0, 6, Orientation::alternating};
    const ModelParams init = spline_init(arch, spec, 11);
    const Dataset data = sample_target(target_1d(), 600, 12);

    TrainConfig config;
    config.max_outer_iters = 40;
    const auto [p1, r1] = train(init, data.X, data.Y, config);
    const auto [p2, r2] = train(init, data.X, data.Y, config);

    REQUIRE(!r1.loss_trace.empty());
    for (size_t i = 1; i < r1.loss_trace.size(); ++i)
        CHECK(r1.loss_trace[i] <= r1.loss_trace[i - 1]);
    CHECK(r1.loss_trace == r2.loss_trace);
    CHECK(flatten(p1) == flatten(p2));
    CHECK(r1.final_mse < mse(init, data.X, data.Y));
}

TEST_CASE("train reaches the loss floor on an exactly fittable problem") {
    ModelParams p = zero_params({ArchKind::mlp, 1, 1, 1});
    p.G(0, 0) = 1.0;
    p.g[0] = 0.5;
    p.D(0, 0) = 0.1;
    Matrix X(1, 1), Y(1, 1);
    X << 3.0;
    Y << 7.0;
    TrainConfig config;
    const auto [trained, report] = train(p, X, Y, config);
    CHECK(report.converged_reason == StopReason::loss_floor);
    CHECK(report.final_mse <= config.loss_floor);
}

TEST_CASE("train with frozen gates matches the direct least-squares oracle") {
    for (std::uint64_t seed : {31, 32, 33}) {
        const Architecture arch{ArchKind::glu, 1, 1, 5};
        PartitionSpec spec{-1.0, 1.0, 5, Orientation::alternating};
        const ModelParams init = spline_init(arch, spec, seed);
        const Dataset data = sample_target(target_1d(), 300, seed + 7);

        TrainConfig config;
        config.trainable_blocks = {Block::head};
        config.max_outer_iters = 50;
        const auto [trained, report] = train(init, data.X, data.Y, config);
        const double direct = oracles::head_lsq_mse(init, data.X, data.Y);
        CHECK(std::abs(report.final_mse - direct) <= 1e-8 * direct);
    }
}

TEST_CASE("train validates its configuration") {
    const Architecture arch{ArchKind::mlp, 1, 1, 2};
    const ModelParams p = random_params(arch, 1);
    const Matrix X = uniform_inputs(10, 1, 2);
    const Matrix Y = Matrix::Zero(10, 1);
    TrainConfig config;
    config.trainable_blocks = {Block::values};  // not applicable to mlp
    CHECK_THROWS_AS(train(p, X, Y, config), std::invalid_argument);
    TrainConfig bad;
    bad.line_search.beta = 1.5;
    CHECK_THROWS_AS(newton_step_block(p, Block::head, X, Y, bad, 1e-10),
                    std::invalid_argument);
}

TEST_CASE("train aborts on a non-finite loss") {
    ModelParams p = zero_params({ArchKind::mlp, 1, 1, 1});
    p.G(0, 0) = 1e308;
    p.D(0, 0) = 1e308;
    p.g[0] = 1.0;
    Matrix X(2, 1), Y(2, 1);
    X << 0.5, 1.0;
    Y << 0.0, 0.0;
    TrainConfig config;
    const auto [trained, report] = train(p, X, Y, config);
    CHECK(report.converged_reason == StopReason::aborted_nonfinite);
}

TEST_CASE("finite_diff_check accepts the analytic gradients") {
    SUBCASE("random glu") {
        const ModelParams p = random_params({ArchKind::glu, 2, 1, 4}, 41);
        const Matrix X = uniform_inputs(50, 2, 42);
        Matrix Y = forward(p, X);
        Y.array() += 0.4;
        CHECK(finite_diff_check(p, X, Y, 1e-6) < 1e-6);
    }
    SUBCASE("random gqu") {
        const ModelParams p = random_params({ArchKind::gqu, 1, 1, 4}, 43);
        const Matrix X = uniform_inputs(50, 1, 44);
        Matrix Y = forward(p, X);
        Y.array() += 0.4;
        CHECK(finite_diff_check(p, X, Y, 1e-6) < 1e-6);
    }
    SUBCASE("all gates open: near machine precision") {
        // Gates open with wide margin on the data range; the loss is exactly
        // quadratic in the head so the centered difference is almost exact.
        ModelParams p = zero_params({ArchKind::mlp, 1, 1, 3});
        p.G << 0.5, -0.4, 0.3;
        p.g << 2.0, 2.5, 3.0;
        p.D << 0.8, -0.6, 0.2;
        p.d[0] = 0.1;
        const Matrix X = uniform_inputs(40, 1, 45);
        Matrix Y(40, 1);
        for (int i = 0; i < 40; ++i) Y(i, 0) = 0.3 * X(i, 0);
        CHECK(finite_diff_check(p, X, Y, 1e-6) < 1e-9);
    }
}

TEST_CASE("trace csv and report json are written") {
    const Architecture arch{ArchKind::mlp, 1, 1, 3};
    PartitionSpec spec{-1.0, 1.0, 3, Orientation::alternating};
    const ModelParams init = spline_init(arch, spec, 3);
    const Dataset data = sample_target(target_1d(), 200, 4);
    TrainConfig config;
    config.max_outer_iters = 5;
    const auto [trained, report] = train(init, data.X, data.Y, config);
    const std::string json = train_report_json(report);
    CHECK(json.find("\"converged_reason\"") != std::string::npos);
    CHECK(json.find("\"loss_trace\"") != std::string::npos);
}
