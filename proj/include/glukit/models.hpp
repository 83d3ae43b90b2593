// SPDX-License-Identifier: Apache-2.0
//
// Shallow gated architectures and their exact derivatives.
//
//   MLP:  y = d + D * relu(G x + g)
//   GLU:  y = d + D * (relu(G x + g) .* (U x + u))
//   GQU:  y = d + D * (relu(G x + g) .* (U x + u) .* (Q x + q))
//
// All arithmetic is double precision. relu'(0) is defined as 0.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace glukit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ArchKind { mlp, glu, gqu };

const char* to_string(ArchKind kind);
ArchKind arch_kind_from_string(const std::string& s);

struct Architecture {
    ArchKind kind = ArchKind::mlp;
    int dim_x = 1;
    int dim_y = 1;
    int n = 1;  // neuron count
};

/// Flat parameter count: MLP (dx+dy+1)n+dy, GLU (2dx+dy+2)n+dy, GQU (3dx+dy+3)n+dy.
int param_count(const Architecture& arch);

// Parameter set for one architecture instance. Matrices not used by the
// architecture (U/u for MLP, Q/q for MLP and GLU) stay empty. Flattening
// order is fixed as (G, g, U, u, Q, q, D, d), row-major, and is what the
// checkpoint format and the block solvers rely on.
struct ModelParams {
    Architecture arch;
    Matrix G;  // n x dim_x, gate weights
    Vector g;  // n, gate biases
    Matrix U;  // n x dim_x, value weights (GLU/GQU)
    Vector u;  // n (GLU/GQU)
    Matrix Q;  // n x dim_x, second value weights (GQU)
    Vector q;  // n (GQU)
    Matrix D;  // dim_y x n, output weights
    Vector d;  // dim_y, output bias
};

/// All-zero parameters with shapes matching arch.
ModelParams zero_params(const Architecture& arch);

/// Throws std::invalid_argument on shape mismatch or non-finite entries.
void validate(const ModelParams& params);

Vector flatten(const ModelParams& params);
ModelParams unflatten(const Architecture& arch, const Vector& flat);

// Intermediates of one batch evaluation, kept for gradient/Jacobian reuse.
struct ForwardTrace {
    Matrix preact;  // m x n, G x + g
    Matrix mask;    // m x n, 1 where preact > 0 else 0
    Matrix gate;    // m x n, relu(preact)
    Matrix val1;    // m x n, U x + u (empty for MLP)
    Matrix val2;    // m x n, Q x + q (empty unless GQU)
    Matrix basis;   // m x n, per-neuron basis values
    Matrix out;     // m x dim_y
};

ForwardTrace forward_trace(const ModelParams& params, const Matrix& X);
Matrix forward(const ModelParams& params, const Matrix& X);

double mse(const ModelParams& params, const Matrix& X, const Matrix& Y);
double rmse(const ModelParams& params, const Matrix& X, const Matrix& Y);

/// Gradient of the mean squared error w.r.t. the flattened parameter vector.
Vector grad_params(const ModelParams& params, const Matrix& X, const Matrix& Y);

// One neuron's additive contribution D_i * basis_i(x) over a batch (dim_y == 1).
struct NeuronActivation {
    int neuron_index = 0;
    Vector values;                   // m
    std::vector<bool> active_mask;   // m, gate open
};

/// Per-neuron decomposition; sum of values plus d reproduces forward().
/// Throws std::invalid_argument when dim_y != 1.
std::vector<NeuronActivation> neuron_decomposition(const ModelParams& params, const Matrix& X);

/// 1D hinge locations -g_i/G_i inside [lo, hi] (inclusive), sorted.
/// Neurons with G_i == 0 contribute no knot.
std::vector<double> cell_boundaries_1d(const ModelParams& params, double lo, double hi);

struct HingeSegment {
    int neuron = 0;
    Eigen::Vector2d a, b;  // endpoints clipped to the box
};

/// 2D hinge lines G_i . x + g_i = 0 clipped to box {xlo, xhi, ylo, yhi}.
/// Neurons whose hinge misses the box (or with zero G row) are skipped.
std::vector<HingeSegment> cell_boundaries_2d(const ModelParams& params,
                                             const std::array<double, 4>& box);

// Checkpoint file: JSON with an arch descriptor and the flattened parameters
// serialized as hex-float strings, so round-trips are bit-exact.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);
std::string checkpoint_json(const ModelParams& params);
ModelParams checkpoint_from_json(const std::string& text);

}  // namespace glukit
