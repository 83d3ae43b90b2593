// SPDX-License-Identifier: Apache-2.0
#include "glukit/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace glukit {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

bool uses_values(ArchKind kind) { return kind != ArchKind::mlp; }
bool uses_second_values(ArchKind kind) { return kind == ArchKind::gqu; }

}  // namespace

const char* to_string(ArchKind kind) {
    switch (kind) {
        case ArchKind::mlp: return "mlp";
        case ArchKind::glu: return "glu";
        case ArchKind::gqu: return "gqu";
    }
    return "?";
}

ArchKind arch_kind_from_string(const std::string& s) {
    if (s == "mlp") return ArchKind::mlp;
    if (s == "glu") return ArchKind::glu;
    if (s == "gqu") return ArchKind::gqu;
    throw std::invalid_argument("unknown architecture: " + s);
}

int param_count(const Architecture& arch) {
    require(arch.n >= 1 && arch.dim_x >= 1 && arch.dim_y >= 1, "architecture dims must be >= 1");
    const int dx = arch.dim_x, dy = arch.dim_y, n = arch.n;
    switch (arch.kind) {
        case ArchKind::mlp: return (dx + dy + 1) * n + dy;
        case ArchKind::glu: return (2 * dx + dy + 2) * n + dy;
        case ArchKind::gqu: return (3 * dx + dy + 3) * n + dy;
    }
    throw std::invalid_argument("bad arch kind");
}

ModelParams zero_params(const Architecture& arch) {
    require(arch.n >= 1 && arch.dim_x >= 1 && arch.dim_y >= 1, "architecture dims must be >= 1");
    ModelParams p;
    p.arch = arch;
    p.G = Matrix::Zero(arch.n, arch.dim_x);
    p.g = Vector::Zero(arch.n);
    if (uses_values(arch.kind)) {
        p.U = Matrix::Zero(arch.n, arch.dim_x);
        p.u = Vector::Zero(arch.n);
    }
    if (uses_second_values(arch.kind)) {
        p.Q = Matrix::Zero(arch.n, arch.dim_x);
        p.q = Vector::Zero(arch.n);
    }
    p.D = Matrix::Zero(arch.dim_y, arch.n);
    p.d = Vector::Zero(arch.dim_y);
    return p;
}

void validate(const ModelParams& p) {
    const auto& a = p.arch;
    require(a.n >= 1 && a.dim_x >= 1 && a.dim_y >= 1, "architecture dims must be >= 1");
    require(p.G.rows() == a.n && p.G.cols() == a.dim_x, "G shape mismatch");
    require(p.g.size() == a.n, "g shape mismatch");
    require(p.D.rows() == a.dim_y && p.D.cols() == a.n, "D shape mismatch");
    require(p.d.size() == a.dim_y, "d shape mismatch");
    if (uses_values(a.kind)) {
        require(p.U.rows() == a.n && p.U.cols() == a.dim_x, "U shape mismatch");
        require(p.u.size() == a.n, "u shape mismatch");
    } else {
        require(p.U.size() == 0 && p.u.size() == 0, "MLP must not carry U/u");
    }
    if (uses_second_values(a.kind)) {
        require(p.Q.rows() == a.n && p.Q.cols() == a.dim_x, "Q shape mismatch");
        require(p.q.size() == a.n, "q shape mismatch");
    } else {
        require(p.Q.size() == 0 && p.q.size() == 0, "only GQU carries Q/q");
    }
    const Vector flat = flatten(p);
    require(flat.allFinite(), "parameters contain non-finite entries");
    require(static_cast<int>(flat.size()) == param_count(a), "flattened length != param_count");
}

Vector flatten(const ModelParams& p) {
    const auto& a = p.arch;
    Vector flat(param_count(a));
    Eigen::Index at = 0;
    auto put_matrix = [&](const Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) flat[at++] = m(r, c);
    };
    auto put_vector = [&](const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) flat[at++] = v[i];
    };
    put_matrix(p.G);
    put_vector(p.g);
    if (uses_values(a.kind)) {
        put_matrix(p.U);
        put_vector(p.u);
    }
    if (uses_second_values(a.kind)) {
        put_matrix(p.Q);
        put_vector(p.q);
    }
    put_matrix(p.D);
    put_vector(p.d);
    return flat;
}

ModelParams unflatten(const Architecture& arch, const Vector& flat) {
    require(static_cast<int>(flat.size()) == param_count(arch),
            "flat vector length != param_count");
    ModelParams p = zero_params(arch);
    Eigen::Index at = 0;
    auto take_matrix = [&](Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[at++];
    };
    auto take_vector = [&](Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = flat[at++];
    };
    take_matrix(p.G);
    take_vector(p.g);
    if (uses_values(arch.kind)) {
        take_matrix(p.U);
        take_vector(p.u);
    }
    if (uses_second_values(arch.kind)) {
        take_matrix(p.Q);
        take_vector(p.q);
    }
    take_matrix(p.D);
    take_vector(p.d);
    return p;
}

ForwardTrace forward_trace(const ModelParams& p, const Matrix& X) {
    const auto& a = p.arch;
    require(X.cols() == a.dim_x, "X column count != dim_x");
    require(X.allFinite(), "X contains non-finite entries");

    ForwardTrace t;
    t.preact = (X * p.G.transpose()).rowwise() + p.g.transpose();
    t.mask = (t.preact.array() > 0.0).cast<double>();
    t.gate = t.preact.cwiseMax(0.0);
    t.basis = t.gate;
    if (uses_values(a.kind)) {
        t.val1 = (X * p.U.transpose()).rowwise() + p.u.transpose();
        t.basis = t.basis.cwiseProduct(t.val1);
    }
    if (uses_second_values(a.kind)) {
        t.val2 = (X * p.Q.transpose()).rowwise() + p.q.transpose();
        t.basis = t.basis.cwiseProduct(t.val2);
    }
    t.out = (t.basis * p.D.transpose()).rowwise() + p.d.transpose();
    return t;
}

Matrix forward(const ModelParams& p, const Matrix& X) { return forward_trace(p, X).out; }

double mse(const ModelParams& p, const Matrix& X, const Matrix& Y) {
    require(Y.rows() == X.rows() && Y.cols() == p.arch.dim_y, "Y shape mismatch");
    require(X.cols() == p.arch.dim_x, "X column count != dim_x");
    // line-search hot path: single basis buffer, no full trace
    Matrix basis = ((X * p.G.transpose()).rowwise() + p.g.transpose()).cwiseMax(0.0);
    if (uses_values(p.arch.kind))
        basis.array() *= ((X * p.U.transpose()).rowwise() + p.u.transpose()).array();
    if (uses_second_values(p.arch.kind))
        basis.array() *= ((X * p.Q.transpose()).rowwise() + p.q.transpose()).array();
    const Matrix R = ((basis * p.D.transpose()).rowwise() + p.d.transpose()) - Y;
    return R.squaredNorm() / static_cast<double>(R.size());
}

double rmse(const ModelParams& p, const Matrix& X, const Matrix& Y) {
    return std::sqrt(mse(p, X, Y));
}

Vector grad_params(const ModelParams& p, const Matrix& X, const Matrix& Y) {
    const auto& a = p.arch;
    require(Y.rows() == X.rows() && Y.cols() == a.dim_y, "Y shape mismatch");
    require(Y.allFinite(), "Y contains non-finite entries");

    const ForwardTrace t = forward_trace(p, X);
    const double scale = 2.0 / static_cast<double>(Y.size());
    const Matrix dY = scale * (t.out - Y);  // m x dim_y

    ModelParams grad = zero_params(a);
    grad.D = dY.transpose() * t.basis;
    grad.d = dY.colwise().sum().transpose();

    const Matrix S = dY * p.D;  // m x n, sensitivity to basis entries

    Matrix dA;  // m x n, sensitivity to preactivation
    switch (a.kind) {
        case ArchKind::mlp:
            dA = S.cwiseProduct(t.mask);
            break;
        case ArchKind::glu: {
            dA = S.cwiseProduct(t.mask).cwiseProduct(t.val1);
            const Matrix dV = S.cwiseProduct(t.gate);
            grad.U = dV.transpose() * X;
            grad.u = dV.colwise().sum().transpose();
            break;
        }
        case ArchKind::gqu: {
            dA = S.cwiseProduct(t.mask).cwiseProduct(t.val1).cwiseProduct(t.val2);
            const Matrix dV = S.cwiseProduct(t.gate).cwiseProduct(t.val2);
            const Matrix dW = S.cwiseProduct(t.gate).cwiseProduct(t.val1);
            grad.U = dV.transpose() * X;
            grad.u = dV.colwise().sum().transpose();
            grad.Q = dW.transpose() * X;
            grad.q = dW.colwise().sum().transpose();
            break;
        }
    }
    grad.G = dA.transpose() * X;
    grad.g = dA.colwise().sum().transpose();
    return flatten(grad);
}

std::vector<NeuronActivation> neuron_decomposition(const ModelParams& p, const Matrix& X) {
    require(p.arch.dim_y == 1, "neuron decomposition requires dim_y == 1");
    const ForwardTrace t = forward_trace(p, X);
    const Eigen::Index m = X.rows();

    std::vector<NeuronActivation> result;
    result.reserve(p.arch.n);
    for (int i = 0; i < p.arch.n; ++i) {
        NeuronActivation na;
        na.neuron_index = i;
        na.values = p.D(0, i) * t.basis.col(i);
        na.active_mask.resize(m);
        for (Eigen::Index r = 0; r < m; ++r) na.active_mask[r] = t.mask(r, i) > 0.0;
        result.push_back(std::move(na));
    }
    return result;
}

std::vector<double> cell_boundaries_1d(const ModelParams& p, double lo, double hi) {
    require(p.arch.dim_x == 1, "1d boundaries require dim_x == 1");
    require(lo <= hi, "empty domain");
    std::vector<double> knots;
    for (int i = 0; i < p.arch.n; ++i) {
        const double gi = p.G(i, 0);
        if (gi == 0.0) continue;  // affine everywhere, no hinge
        const double knot = -p.g[i] / gi;
        if (knot >= lo && knot <= hi) knots.push_back(knot);
    }
    std::sort(knots.begin(), knots.end());
    return knots;
}

std::vector<HingeSegment> cell_boundaries_2d(const ModelParams& p,
                                             const std::array<double, 4>& box) {
    require(p.arch.dim_x == 2, "2d boundaries require dim_x == 2");
    const double xlo = box[0], xhi = box[1], ylo = box[2], yhi = box[3];
    require(xlo < xhi && ylo < yhi, "empty box");

    std::vector<HingeSegment> segments;
    for (int i = 0; i < p.arch.n; ++i) {
        const double gx = p.G(i, 0), gy = p.G(i, 1), c = p.g[i];
        if (gx == 0.0 && gy == 0.0) continue;

        // Intersect gx*x + gy*y + c = 0 with the four box edges.
        std::vector<Eigen::Vector2d> pts;
        auto add = [&](double x, double y) {
            for (const auto& q : pts)
                if (std::abs(q.x() - x) < 1e-12 && std::abs(q.y() - y) < 1e-12) return;
            pts.emplace_back(x, y);
        };
        if (gy != 0.0) {
            for (double x : {xlo, xhi}) {
                const double y = -(gx * x + c) / gy;
                if (y >= ylo - 1e-12 && y <= yhi + 1e-12) add(x, std::clamp(y, ylo, yhi));
            }
        }
        if (gx != 0.0) {
            for (double y : {ylo, yhi}) {
                const double x = -(gy * y + c) / gx;
                if (x >= xlo - 1e-12 && x <= xhi + 1e-12) add(std::clamp(x, xlo, xhi), y);
            }
        }
        if (pts.size() < 2) continue;  // hinge misses the box
        HingeSegment seg;
        seg.neuron = i;
        seg.a = pts[0];
        seg.b = pts[1];
        // Degenerate (single corner) intersections are skipped.
        if ((seg.a - seg.b).norm() < 1e-12) continue;
        segments.push_back(seg);
    }
    return segments;
}

// --- checkpoint io ---------------------------------------------------------

namespace {

std::string double_to_hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double hex_to_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw std::invalid_argument("bad hex float in checkpoint: " + s);
    return v;
}

}  // namespace

std::string checkpoint_json(const ModelParams& p) {
    validate(p);
    nlohmann::json j;
    j["format"] = "glukit-checkpoint";
    j["version"] = 1;
    j["arch"] = {{"kind", to_string(p.arch.kind)},
                 {"dim_x", p.arch.dim_x},
                 {"dim_y", p.arch.dim_y},
                 {"n", p.arch.n}};
    const Vector flat = flatten(p);
    std::vector<std::string> hex(flat.size());
    for (Eigen::Index i = 0; i < flat.size(); ++i) hex[i] = double_to_hex(flat[i]);
    j["params_hex"] = hex;
    return j.dump(2) + "\n";
}

ModelParams checkpoint_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "glukit-checkpoint")
        throw std::invalid_argument("not a glukit checkpoint");
    Architecture arch;
    arch.kind = arch_kind_from_string(j.at("arch").at("kind").get<std::string>());
    arch.dim_x = j.at("arch").at("dim_x").get<int>();
    arch.dim_y = j.at("arch").at("dim_y").get<int>();
    arch.n = j.at("arch").at("n").get<int>();
    const auto hex = j.at("params_hex").get<std::vector<std::string>>();
    Vector flat(hex.size());
    for (size_t i = 0; i < hex.size(); ++i) flat[static_cast<Eigen::Index>(i)] = hex_to_double(hex[i]);
    ModelParams p = unflatten(arch, flat);
    validate(p);
    return p;
}

void save_checkpoint(const ModelParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << checkpoint_json(p);
    if (!out) throw std::runtime_error("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

}  // namespace glukit
