// SPDX-License-Identifier: Apache-2.0
//
// Deterministic damped Gauss-Newton trainer with block (layer-by-layer) full
// batch updates. Per block step:
//
//   (J'J + lambda * diag(J'J)) s = -J'r
//
// solved after Jacobi (symmetric diagonal) scaling, with rows/columns whose
// J'J diagonal is near zero eliminated (those parameters receive no update),
// followed by a backtracking Armijo line search on the MSE. The Gauss-Newton
// matrix is the PSD Newton approximation for least squares, so accepted steps
// never increase the loss.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "glukit/models.hpp"

namespace glukit {

enum class Block { head, values, gates };

const char* to_string(Block block);
Block block_from_string(const std::string& s);

/// Blocks that exist for the architecture, in update order head -> values -> gates.
std::vector<Block> applicable_blocks(const Architecture& arch);

int block_param_count(const Architecture& arch, Block block);
Vector get_block(const ModelParams& params, Block block);
void set_block(ModelParams& params, Block block, const Vector& value);

/// Jacobian of the stacked residual vector (row index = point * dim_y + output)
/// w.r.t. the block parameters, column order matching get_block.
Matrix block_jacobian(const ModelParams& params, const ForwardTrace& trace, const Matrix& X,
                      Block block);

struct LineSearchConfig {
    double beta = 0.5;        // backtracking factor
    double c = 1e-4;          // sufficient-decrease constant
    int max_backtracks = 40;
};

struct DampingConfig {
    double lambda0 = 1e-10;
    double increase = 10.0;   // on rejected step
    double decrease = 0.1;    // on accepted step
    double lambda_min = 1e-14;
    double lambda_max = 1e8;
};

struct TrainConfig {
    int max_outer_iters = 2000;
    double grad_tol = 1e-13;     // stop when gradient inf-norm below
    double loss_floor = 1e-26;   // stop when MSE below (RMSE 1e-13)
    // A full block cycle must shrink the MSE by this relative amount,
    // otherwise the run stops as line_search_stall (ftol-style criterion;
    // steps below it are still applied).
    double progress_rel_tol = 1e-12;
    double singular_diag_threshold = 1e-12;  // relative to max J'J diagonal
    LineSearchConfig line_search;
    DampingConfig damping;
    std::vector<Block> trainable_blocks = {Block::head, Block::values, Block::gates};
    std::uint64_t seed = 0;
    bool record_trace = true;
};

enum class StopReason { grad_tol, loss_floor, max_iters, line_search_stall, aborted_nonfinite };
const char* to_string(StopReason reason);

struct StepReport {
    bool accepted = false;
    bool zero_direction = false;  // J'r == 0 or everything eliminated
    int eliminated = 0;
    double lambda_used = 0.0;
    int backtracks = 0;
    double mse_before = 0.0;
    double mse_after = 0.0;
};

struct BlockTraceRow {
    int outer_iter = 0;
    Block block = Block::head;
    double mse = 0.0;
    int backtracks = 0;
    int eliminated = 0;
    bool accepted = false;
};

struct TrainReport {
    double final_mse = 0.0;
    double final_rmse = 0.0;
    int iterations = 0;
    StopReason converged_reason = StopReason::max_iters;
    std::vector<double> loss_trace;        // MSE after each outer iteration
    std::vector<BlockTraceRow> block_trace;
    double wall_time_sec = 0.0;
};

struct StepResult {
    ModelParams params;
    StepReport report;
    double lambda_next = 0.0;
};

/// One damped Gauss-Newton step on a single block. lambda is the current
/// damping; the adapted value for the next call is returned in lambda_next.
StepResult newton_step_block(const ModelParams& params, Block block, const Matrix& X,
                             const Matrix& Y, const TrainConfig& config, double lambda);

/// Full training loop: cycles trainable blocks in fixed order until a stop
/// condition. Deterministic given (params, data, config).
std::pair<ModelParams, TrainReport> train(const ModelParams& params, const Matrix& X,
                                          const Matrix& Y, const TrainConfig& config);

/// Analytic block gradients vs centered finite differences. Gate parameters
/// whose +-step perturbation flips any data point's activation are excluded.
/// Returns the max over blocks of ||g_an - g_fd||_inf / max(||g_an||_inf,
/// ||g_fd||_inf, 1e-12), entries restricted to included parameters.
double finite_diff_check(const ModelParams& params, const Matrix& X, const Matrix& Y, double step);

std::string train_report_json(const TrainReport& report);
void write_trace_csv(const TrainReport& report, const std::string& path);

}  // namespace glukit
