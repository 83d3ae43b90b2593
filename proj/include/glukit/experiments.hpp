// SPDX-License-Identifier: Apache-2.0
//
// Targets, dataset generators, CSV ingestion, width-scaling sweeps and
// log-log slope fits.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glukit/construct.hpp"
#include "glukit/models.hpp"
#include "glukit/slopefit.hpp"
#include "glukit/train.hpp"

namespace glukit {

// Per-column affine transform applied to features: x' = (x - offset) / scale.
struct Normalization {
    Eigen::VectorXd offset;
    Eigen::VectorXd scale;
};

struct Dataset {
    Matrix X;  // m x dim_x
    Matrix Y;  // m x dim_y
    std::string name;
    std::string provenance;  // "synthetic(seed=..,gen=..)" or "csv(path=..)"
    std::optional<Normalization> normalization;
    int dropped_rows = 0;  // rows removed during CSV ingestion
};

struct ScalingRecord {
    ArchKind arch = ArchKind::mlp;
    int n = 0;
    int params = 0;
    double rmse = 0.0;
    std::uint64_t seed_used = 0;
    StopReason converged_reason = StopReason::max_iters;
    bool converged = true;  // false only on numerical abort
};

enum class SlopeAxis { neurons, params };

/// f(x) = 1 / (1 + cos^2(pi x)) with analytic first and second derivatives.
TargetFunction target_1d();
TargetFunction target_linear();     // 2x - 0.25
TargetFunction target_constant();   // 0.7
TargetFunction target_quadratic();  // 1.5 x^2 - x + 0.3
/// f(x, y) = sin(4x) sin(4y).
TargetFunction target_2d();
/// Lookup by name ("invcos2", "linear", "constant", "quadratic", "sin4xy").
TargetFunction target_by_name(const std::string& name);
std::vector<std::string> target_names();

/// m points uniform over [lo, hi]^dim_x, labels f(x).
Dataset sample_target(const TargetFunction& f, int m, std::uint64_t seed, double lo = -1.0,
                      double hi = 1.0);

/// Friedman #1/#2/#3 synthetic regression problems (standard formulas and
/// input ranges); noise defaults to 0.
Dataset friedman(int k, int m, std::uint64_t seed, double noise = 0.0);

/// Noise-free Friedman response at one input row.
double friedman_value(int k, const Eigen::RowVectorXd& x);

/// Parses a comma-separated file with a header row. Rows with missing-value
/// tokens (empty, NA, NaN, null, ?) are dropped and counted; any other
/// non-numeric cell is an error. normalize standardizes features to zero
/// mean / unit variance and records the transform.
Dataset load_csv(const std::string& path, const std::vector<std::string>& feature_columns,
                 const std::string& target_column, bool normalize);

/// Standardize features in place (used for synthetic data too); records the
/// transform in dataset.normalization.
void normalize_features(Dataset& data);

struct SweepConfig {
    std::vector<int> n_grid;
    int restarts = 4;
    TrainConfig train;
    std::uint64_t base_seed = 1;
    int workers = 0;  // 0 = hardware concurrency
};

/// Per width: init (spline_init for 1D, random live-gate init otherwise),
/// train with restarts, keep the best RMSE. Records come back sorted by n.
std::vector<ScalingRecord> scaling_sweep(ArchKind kind, const Dataset& data,
                                         const SweepConfig& config);

/// Log-log OLS of RMSE against the chosen axis. Excludes floor hits
/// (rmse < 1e-12) and aborted runs; throws std::invalid_argument when fewer
/// than 4 usable points remain.
SlopeFit fit_slope(const std::vector<ScalingRecord>& records, SlopeAxis axis,
                   double rmse_floor = 1e-12);

/// Same exclusion rules, but reports failure in SlopeFit::ok instead of
/// throwing (used by harnesses that must keep going).
SlopeFit try_fit_slope(const std::vector<ScalingRecord>& records, SlopeAxis axis,
                       double rmse_floor = 1e-12);

/// Count of best-of-restart RMSE increases as n grows (ideally 0).
int monotonicity_violations(const std::vector<ScalingRecord>& records);

/// CSV with header "arch,n,params,rmse,seed,converged"; shortest round-trip
/// float formatting, deterministic bytes.
std::string records_csv(const std::vector<ScalingRecord>& records);
void write_records_csv(const std::vector<ScalingRecord>& records, const std::string& path);
std::vector<ScalingRecord> parse_records_csv(const std::string& text);

/// Default width grid: log-spaced, capped at 50.
std::vector<int> default_n_grid();

}  // namespace glukit
