// SPDX-License-Identifier: Apache-2.0
#include "glukit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace glukit {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

Matrix residual(const ForwardTrace& trace, const Matrix& Y) { return trace.out - Y; }

// Stacked residual, row index = point * dim_y + output.
Vector stack(const Matrix& R) {
    Vector r(R.size());
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < R.rows(); ++i)
        for (Eigen::Index k = 0; k < R.cols(); ++k) r[at++] = R(i, k);
    return r;
}

}  // namespace

const char* to_string(Block block) {
    switch (block) {
        case Block::head: return "head";
        case Block::values: return "values";
        case Block::gates: return "gates";
    }
    return "?";
}

Block block_from_string(const std::string& s) {
    if (s == "head") return Block::head;
    if (s == "values") return Block::values;
    if (s == "gates") return Block::gates;
    throw std::invalid_argument("unknown block: " + s);
}

const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::grad_tol: return "grad_tol";
        case StopReason::loss_floor: return "loss_floor";
        case StopReason::max_iters: return "max_iters";
        case StopReason::line_search_stall: return "line_search_stall";
        case StopReason::aborted_nonfinite: return "aborted_nonfinite";
    }
    return "?";
}

std::vector<Block> applicable_blocks(const Architecture& arch) {
    if (arch.kind == ArchKind::mlp) return {Block::head, Block::gates};
    return {Block::head, Block::values, Block::gates};
}

int block_param_count(const Architecture& arch, Block block) {
    const int n = arch.n, dx = arch.dim_x, dy = arch.dim_y;
    switch (block) {
        case Block::head: return dy * n + dy;
        case Block::gates: return n * dx + n;
        case Block::values:
            if (arch.kind == ArchKind::mlp) return 0;
            return (arch.kind == ArchKind::gqu ? 2 : 1) * (n * dx + n);
    }
    return 0;
}

Vector get_block(const ModelParams& p, Block block) {
    Vector out(block_param_count(p.arch, block));
    Eigen::Index at = 0;
    auto put_matrix = [&](const Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) out[at++] = m(r, c);
    };
    auto put_vector = [&](const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) out[at++] = v[i];
    };
    switch (block) {
        case Block::head:
            put_matrix(p.D);
            put_vector(p.d);
            break;
        case Block::gates:
            put_matrix(p.G);
            put_vector(p.g);
            break;
        case Block::values:
            require(p.arch.kind != ArchKind::mlp, "MLP has no values block");
            put_matrix(p.U);
            put_vector(p.u);
            if (p.arch.kind == ArchKind::gqu) {
                put_matrix(p.Q);
                put_vector(p.q);
            }
            break;
    }
    return out;
}

void set_block(ModelParams& p, Block block, const Vector& value) {
    require(value.size() == block_param_count(p.arch, block), "block vector length mismatch");
    Eigen::Index at = 0;
    auto take_matrix = [&](Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = value[at++];
    };
    auto take_vector = [&](Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = value[at++];
    };
    switch (block) {
        case Block::head:
            take_matrix(p.D);
            take_vector(p.d);
            break;
        case Block::gates:
            take_matrix(p.G);
            take_vector(p.g);
            break;
        case Block::values:
            require(p.arch.kind != ArchKind::mlp, "MLP has no values block");
            take_matrix(p.U);
            take_vector(p.u);
            if (p.arch.kind == ArchKind::gqu) {
                take_matrix(p.Q);
                take_vector(p.q);
            }
            break;
    }
}

Matrix block_jacobian(const ModelParams& p, const ForwardTrace& t, const Matrix& X, Block block) {
    const auto& a = p.arch;
    const Eigen::Index m = X.rows();
    const int dy = a.dim_y, dx = a.dim_x, n = a.n;
    const Eigen::Index rows = m * dy;
    Matrix J = Matrix::Zero(rows, block_param_count(a, block));

    // Residual sensitivity to one neuron's pre-activation / value branches.
    // gate factor: d basis / d preact; value factors: d basis / d val.
    auto fill_branch = [&](Eigen::Index col0, const Matrix& factor, bool with_x) {
        // Columns: weight (i, j) row-major [if with_x], then bias i.
        Eigen::Index col = col0;
        if (with_x) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < dx; ++j) {
                    for (Eigen::Index r = 0; r < m; ++r) {
                        const double base = factor(r, i) * X(r, j);
                        for (int k = 0; k < dy; ++k) J(r * dy + k, col) = p.D(k, i) * base;
                    }
                    ++col;
                }
        }
        for (int i = 0; i < n; ++i) {
            for (Eigen::Index r = 0; r < m; ++r) {
                const double base = factor(r, i);
                for (int k = 0; k < dy; ++k) J(r * dy + k, col) = p.D(k, i) * base;
            }
            ++col;
        }
        return col;
    };

    switch (block) {
        case Block::head: {
            // d out_k / d D(k', i) = delta(k,k') * basis_i; d out_k / d d_k' = delta.
            Eigen::Index col = 0;
            for (int k = 0; k < dy; ++k)
                for (int i = 0; i < n; ++i) {
                    for (Eigen::Index r = 0; r < m; ++r) J(r * dy + k, col) = t.basis(r, i);
                    ++col;
                }
            for (int k = 0; k < dy; ++k) {
                for (Eigen::Index r = 0; r < m; ++r) J(r * dy + k, col) = 1.0;
                ++col;
            }
            break;
        }
        case Block::gates: {
            Matrix factor = t.mask;
            if (a.kind != ArchKind::mlp) factor = factor.cwiseProduct(t.val1);
            if (a.kind == ArchKind::gqu) factor = factor.cwiseProduct(t.val2);
            fill_branch(0, factor, true);
            break;
        }
        case Block::values: {
            require(a.kind != ArchKind::mlp, "MLP has no values block");
            Matrix vfac = t.gate;
            if (a.kind == ArchKind::gqu) vfac = vfac.cwiseProduct(t.val2);
            Eigen::Index col = fill_branch(0, vfac, true);
            if (a.kind == ArchKind::gqu) {
                const Matrix qfac = t.gate.cwiseProduct(t.val1);
                fill_branch(col, qfac, true);
            }
            break;
        }
    }
    return J;
}

StepResult newton_step_block(const ModelParams& params, Block block, const Matrix& X,
                             const Matrix& Y, const TrainConfig& config, double lambda) {
    const auto& ls = config.line_search;
    require(ls.beta > 0.0 && ls.beta < 1.0, "line search beta in (0,1)");
    require(ls.c > 0.0 && ls.c < 1.0, "line search c in (0,1)");
    require(config.singular_diag_threshold > 0.0, "singular threshold > 0");

    const double N = static_cast<double>(Y.size());
    StepResult result;
    result.params = params;
    result.lambda_next = lambda;

    const ForwardTrace trace = forward_trace(params, X);
    const Matrix R = residual(trace, Y);
    const double mse0 = R.squaredNorm() / N;
    result.report.mse_before = mse0;
    result.report.mse_after = mse0;
    result.report.lambda_used = lambda;

    const Matrix J = block_jacobian(params, trace, X, block);
    const Vector r = stack(R);
    const Vector jtr = J.transpose() * r;
    const int p = static_cast<int>(J.cols());

    if (jtr.lpNorm<Eigen::Infinity>() == 0.0) {
        result.report.zero_direction = true;
        return result;
    }

    Matrix H = Matrix::Zero(p, p);
    H.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
    H = H.selfadjointView<Eigen::Lower>();
    const Vector diag = H.diagonal();
    const double max_diag = diag.maxCoeff();

    std::vector<int> keep;
    keep.reserve(p);
    for (int i = 0; i < p; ++i)
        if (diag[i] > config.singular_diag_threshold * max_diag) keep.push_back(i);
    result.report.eliminated = p - static_cast<int>(keep.size());
    if (keep.empty()) {
        result.report.zero_direction = true;
        return result;
    }

    const int pk = static_cast<int>(keep.size());
    Matrix M(pk, pk);
    Vector rhs(pk);
    for (int a = 0; a < pk; ++a) {
        rhs[a] = -jtr[keep[a]];
        for (int b = 0; b < pk; ++b) M(a, b) = H(keep[a], keep[b]);
        M(a, a) += lambda * H(keep[a], keep[a]);
    }

    // Jacobi preconditioning: solve (P M P) z = P rhs with P = diag(M)^(-1/2),
    // then s = P z. Exact algebra, much better conditioning.
    Vector scal(pk);
    for (int a = 0; a < pk; ++a) scal[a] = 1.0 / std::sqrt(M(a, a));
    Matrix Ms = scal.asDiagonal() * M * scal.asDiagonal();
    const Vector rs = scal.asDiagonal() * rhs;
    const Vector z = Ms.ldlt().solve(rs);
    Vector step_keep = scal.asDiagonal() * z;

    if (!step_keep.allFinite()) {
        // Factorization broke down; treat as rejected and raise damping.
        result.lambda_next = std::min(lambda * config.damping.increase, config.damping.lambda_max);
        return result;
    }

    Vector direction = Vector::Zero(p);
    for (int a = 0; a < pk; ++a) direction[keep[a]] = step_keep[a];

    // Directional derivative of the MSE along the step.
    const double dir_deriv = (2.0 / N) * jtr.dot(direction);

    const Vector base = get_block(params, block);
    double alpha = 1.0;
    for (int bt = 0; bt <= ls.max_backtracks; ++bt) {
        ModelParams candidate = params;
        set_block(candidate, block, base + alpha * direction);
        const double mse_c = mse(candidate, X, Y);
        if (mse_c <= mse0 + ls.c * alpha * dir_deriv) {
            result.params = std::move(candidate);
            result.report.accepted = true;
            result.report.backtracks = bt;
            result.report.mse_after = mse_c;
            result.lambda_next =
                std::max(lambda * config.damping.decrease, config.damping.lambda_min);
            return result;
        }
        alpha *= ls.beta;
    }
    result.report.backtracks = ls.max_backtracks;
    result.lambda_next = std::min(lambda * config.damping.increase, config.damping.lambda_max);
    return result;
}

std::pair<ModelParams, TrainReport> train(const ModelParams& start, const Matrix& X,
                                          const Matrix& Y, const TrainConfig& config) {
    validate(start);
    require(X.rows() == Y.rows(), "X/Y row mismatch");
    require(Y.cols() == start.arch.dim_y, "Y column count != dim_y");
    require(Y.allFinite() && X.allFinite(), "data contains non-finite entries");
    require(config.max_outer_iters >= 0, "max_outer_iters >= 0");
    require(config.grad_tol > 0.0 && config.loss_floor > 0.0, "tolerances > 0");

    const auto t0 = std::chrono::steady_clock::now();

    std::vector<Block> cycle;
    for (Block b : applicable_blocks(start.arch))
        if (std::find(config.trainable_blocks.begin(), config.trainable_blocks.end(), b) !=
            config.trainable_blocks.end())
            cycle.push_back(b);
    require(!cycle.empty(), "no trainable block applies to this architecture");

    ModelParams params = start;
    TrainReport report;
    std::map<Block, double> lambda;
    for (Block b : cycle) lambda[b] = config.damping.lambda0;

    double current = mse(params, X, Y);
    auto finish = [&](StopReason reason) {
        report.converged_reason = reason;
        report.final_mse = current;
        report.final_rmse = std::isfinite(current) ? std::sqrt(current) : current;
        report.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::make_pair(params, report);
    };

    for (int iter = 1; iter <= config.max_outer_iters; ++iter) {
        if (!std::isfinite(current)) return finish(StopReason::aborted_nonfinite);
        if (current <= config.loss_floor) return finish(StopReason::loss_floor);

        // Gradient stop over the trainable blocks only.
        const ModelParams grad = unflatten(start.arch, grad_params(params, X, Y));
        double grad_inf = 0.0;
        for (Block b : cycle)
            grad_inf = std::max(grad_inf, get_block(grad, b).lpNorm<Eigen::Infinity>());
        if (!std::isfinite(grad_inf)) return finish(StopReason::aborted_nonfinite);
        if (grad_inf <= config.grad_tol) return finish(StopReason::grad_tol);

        const double cycle_start = current;
        bool any_accepted = false;
        for (Block b : cycle) {
            StepResult step = newton_step_block(params, b, X, Y, config, lambda[b]);
            lambda[b] = step.lambda_next;
            if (step.report.accepted) {
                params = std::move(step.params);
                current = step.report.mse_after;
                any_accepted = true;
            }
            if (config.record_trace)
                report.block_trace.push_back({iter, b, current, step.report.backtracks,
                                              step.report.eliminated, step.report.accepted});
        }
        report.iterations = iter;
        if (config.record_trace) report.loss_trace.push_back(current);
        if (!std::isfinite(current)) return finish(StopReason::aborted_nonfinite);
        const bool progressed =
            any_accepted && cycle_start - current > config.progress_rel_tol * cycle_start;
        if (!progressed) return finish(StopReason::line_search_stall);
    }
    return finish(StopReason::max_iters);
}

double finite_diff_check(const ModelParams& params, const Matrix& X, const Matrix& Y,
                         double step) {
    require(step > 0.0, "step > 0");
    validate(params);
    const ModelParams analytic = unflatten(params.arch, grad_params(params, X, Y));
    const Matrix base_mask = forward_trace(params, X).mask;

    double worst = 0.0;
    for (Block block : applicable_blocks(params.arch)) {
        const Vector ga = get_block(analytic, block);
        const Vector base = get_block(params, block);
        const int p = static_cast<int>(base.size());

        Vector gfd(p);
        std::vector<bool> included(p, true);
        for (int i = 0; i < p; ++i) {
            ModelParams plus = params, minus = params;
            Vector v = base;
            v[i] += step;
            set_block(plus, block, v);
            v[i] = base[i] - step;
            set_block(minus, block, v);
            if (block == Block::gates) {
                // A perturbation that flips any point's gate crosses a kink;
                // the centered difference is invalid there.
                const Matrix mp = forward_trace(plus, X).mask;
                const Matrix mm = forward_trace(minus, X).mask;
                if ((mp.array() != base_mask.array()).any() ||
                    (mm.array() != base_mask.array()).any()) {
                    included[i] = false;
                    continue;
                }
            }
            gfd[i] = (mse(plus, X, Y) - mse(minus, X, Y)) / (2.0 * step);
        }

        double scale = 0.0, diff = 0.0;
        for (int i = 0; i < p; ++i) {
            if (!included[i]) continue;
            scale = std::max({scale, std::abs(ga[i]), std::abs(gfd[i])});
            diff = std::max(diff, std::abs(ga[i] - gfd[i]));
        }
        if (scale > 0.0) worst = std::max(worst, diff / std::max(scale, 1e-12));
    }
    return worst;
}

std::string train_report_json(const TrainReport& report) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "{\"final_mse\": " << num(report.final_mse)
        << ", \"final_rmse\": " << num(report.final_rmse)
        << ", \"iterations\": " << report.iterations << ", \"converged_reason\": \""
        << to_string(report.converged_reason) << "\""
        << ", \"wall_time_sec\": " << num(report.wall_time_sec) << ", \"loss_trace\": [";
    for (size_t i = 0; i < report.loss_trace.size(); ++i) {
        if (i) out << ", ";
        out << num(report.loss_trace[i]);
    }
    out << "]}";
    return out.str();
}

void write_trace_csv(const TrainReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << "iter,mse,block,backtracks,eliminated\n";
    char buf[64];
    for (const auto& row : report.block_trace) {
        std::snprintf(buf, sizeof(buf), "%.17g", row.mse);
        out << row.outer_iter << ',' << buf << ',' << to_string(row.block) << ','
            << row.backtracks << ',' << row.eliminated << '\n';
    }
}

}  // namespace glukit
