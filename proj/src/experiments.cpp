// SPDX-License-Identifier: Apache-2.0
#include "glukit/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "glukit/rng.hpp"

namespace glukit {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

TargetFunction target_1d() {
    TargetFunction t;
    t.name = "invcos2";
    t.dim_x = 1;
    t.f1d = [](double x) { return 1.0 / (1.0 + std::cos(M_PI * x) * std::cos(M_PI * x)); };
    t.f = [fn = t.f1d](const Eigen::RowVectorXd& x) { return fn(x[0]); };
    t.d1 = [](double x) {
        const double c = std::cos(M_PI * x);
        const double den = 1.0 + c * c;
        return M_PI * std::sin(2.0 * M_PI * x) / (den * den);
    };
    t.d2 = [](double x) {
        const double c = std::cos(M_PI * x);
        const double den = 1.0 + c * c;
        const double s2 = std::sin(2.0 * M_PI * x);
        return 2.0 * M_PI * M_PI * std::cos(2.0 * M_PI * x) / (den * den) +
               2.0 * M_PI * M_PI * s2 * s2 / (den * den * den);
    };
    return t;
}

TargetFunction target_linear() {
    TargetFunction t;
    t.name = "linear";
    t.f1d = [](double x) { return 2.0 * x - 0.25; };
    t.f = [fn = t.f1d](const Eigen::RowVectorXd& x) { return fn(x[0]); };
    t.d1 = [](double) { return 2.0; };
    t.d2 = [](double) { return 0.0; };
    return t;
}

TargetFunction target_constant() {
    TargetFunction t;
    t.name = "constant";
    t.f1d = [](double) { return 0.7; };
    t.f = [fn = t.f1d](const Eigen::RowVectorXd& x) { return fn(x[0]); };
    t.d1 = [](double) { return 0.0; };
    t.d2 = [](double) { return 0.0; };
    return t;
}

TargetFunction target_quadratic() {
    TargetFunction t;
    t.name = "quadratic";
    t.f1d = [](double x) { return 1.5 * x * x - x + 0.3; };
    t.f = [fn = t.f1d](const Eigen::RowVectorXd& x) { return fn(x[0]); };
    t.d1 = [](double x) { return 3.0 * x - 1.0; };
    t.d2 = [](double) { return 3.0; };
    return t;
}

TargetFunction target_2d() {
    TargetFunction t;
    t.name = "sin4xy";
    t.dim_x = 2;
    t.f = [](const Eigen::RowVectorXd& x) { return std::sin(4.0 * x[0]) * std::sin(4.0 * x[1]); };
    return t;
}

TargetFunction target_by_name(const std::string& name) {
    if (name == "invcos2") return target_1d();
    if (name == "linear") return target_linear();
    if (name == "constant") return target_constant();
    if (name == "quadratic") return target_quadratic();
    if (name == "sin4xy") return target_2d();
    throw std::invalid_argument("unknown target: " + name);
}

std::vector<std::string> target_names() {
    return {"invcos2", "linear", "constant", "quadratic", "sin4xy"};
}

Dataset sample_target(const TargetFunction& f, int m, std::uint64_t seed, double lo, double hi) {
    require(m >= 1, "need m >= 1 samples");
    require(hi > lo, "empty sample domain");
    Rng rng(seed);
    Dataset data;
    data.X.resize(m, f.dim_x);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < f.dim_x; ++c) data.X(r, c) = rng.uniform(lo, hi);
    data.Y = f.eval(data.X);
    data.name = f.name;
    std::ostringstream prov;
    prov << "synthetic(seed=" << seed << ",gen=" << f.name << ")";
    data.provenance = prov.str();
    return data;
}

double friedman_value(int k, const Eigen::RowVectorXd& x) {
    switch (k) {
        case 1:
            return 10.0 * std::sin(M_PI * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
                   10.0 * x[3] + 5.0 * x[4];
        case 2: {
            const double t = x[1] * x[2] - 1.0 / (x[1] * x[3]);
            return std::sqrt(x[0] * x[0] + t * t);
        }
        case 3: {
            const double t = x[1] * x[2] - 1.0 / (x[1] * x[3]);
            return std::atan(t / x[0]);
        }
        default:
            throw std::invalid_argument("friedman k must be 1, 2 or 3");
    }
}

Dataset friedman(int k, int m, std::uint64_t seed, double noise) {
    require(k >= 1 && k <= 3, "friedman k must be 1, 2 or 3");
    require(m >= 1, "need m >= 1 samples");
    const int dim = k == 1 ? 5 : 4;
    Rng rng(seed);

    Dataset data;
    data.X.resize(m, dim);
    data.Y.resize(m, 1);
    for (int r = 0; r < m; ++r) {
        if (k == 1) {
            for (int c = 0; c < dim; ++c) data.X(r, c) = rng.uniform();
        } else {
            data.X(r, 0) = rng.uniform(0.0, 100.0);
            data.X(r, 1) = rng.uniform(40.0 * M_PI, 560.0 * M_PI);
            data.X(r, 2) = rng.uniform();
            data.X(r, 3) = rng.uniform(1.0, 11.0);
        }
        data.Y(r, 0) = friedman_value(k, data.X.row(r));
    }
    if (noise > 0.0)
        for (int r = 0; r < m; ++r) data.Y(r, 0) += noise * rng.gaussian();

    std::ostringstream name, prov;
    name << "friedman" << k;
    prov << "synthetic(seed=" << seed << ",gen=friedman" << k << ",noise=" << noise << ")";
    data.name = name.str();
    data.provenance = prov.str();
    return data;
}

// --- csv ingestion ----------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" ||
           cell == "null" || cell == "NULL" || cell == "?";
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<std::string>& feature_columns,
                 const std::string& target_column, bool normalize) {
    require(!feature_columns.empty(), "need at least one feature column");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open csv: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
    const auto header = split_csv_line(line);

    auto column_index = [&](const std::string& name) {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("column not found in " + path + ": " + name);
    };
    std::vector<int> fcols;
    for (const auto& name : feature_columns) fcols.push_back(column_index(name));
    const int tcol = column_index(target_column);

    std::vector<std::vector<double>> rows;
    int dropped = 0;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << path << ":" << line_no << ": expected " << header.size() << " cells, got "
                << cells.size();
            throw std::runtime_error(msg.str());
        }
        std::vector<double> row;
        row.reserve(fcols.size() + 1);
        bool missing = false;
        auto parse_cell = [&](int col) {
            const std::string& cell = cells[col];
            if (is_missing(cell)) {
                missing = true;
                return 0.0;
            }
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end != cell.c_str() + cell.size()) {
                std::ostringstream msg;
                msg << path << ":" << line_no << ": non-numeric cell '" << cell << "' in column "
                    << header[col];
                throw std::runtime_error(msg.str());
            }
            return v;
        };
        for (int col : fcols) row.push_back(parse_cell(col));
        row.push_back(parse_cell(tcol));
        if (missing) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("no usable rows in csv: " + path);

    Dataset data;
    const int m = static_cast<int>(rows.size());
    const int dx = static_cast<int>(fcols.size());
    data.X.resize(m, dx);
    data.Y.resize(m, 1);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < dx; ++c) data.X(r, c) = rows[r][c];
        data.Y(r, 0) = rows[r][dx];
    }
    data.name = path;
    data.provenance = "csv(path=" + path + ")";
    data.dropped_rows = dropped;
    if (normalize) normalize_features(data);
    return data;
}

void normalize_features(Dataset& data) {
    const int dx = static_cast<int>(data.X.cols());
    const double m = static_cast<double>(data.X.rows());
    Normalization norm;
    norm.offset.resize(dx);
    norm.scale.resize(dx);
    for (int c = 0; c < dx; ++c) {
        const double mean = data.X.col(c).mean();
        const double var = (data.X.col(c).array() - mean).square().sum() / m;
        const double sd = std::sqrt(var);
        norm.offset[c] = mean;
        norm.scale[c] = sd > 1e-300 ? sd : 1.0;
        data.X.col(c) = (data.X.col(c).array() - norm.offset[c]) / norm.scale[c];
    }
    data.normalization = norm;
}

// --- sweeps ------------------------------------------------------------------

namespace {

ModelParams random_init_highdim(const Architecture& arch, const Matrix& X, std::uint64_t seed) {
    // Unit-norm gate rows with hinges placed inside the data's projection
    // range, so every neuron starts active on part of the data.
    Rng rng(seed);
    ModelParams p = zero_params(arch);
    for (int i = 0; i < arch.n; ++i) {
        Eigen::RowVectorXd row(arch.dim_x);
        double norm = 0.0;
        do {
            for (int c = 0; c < arch.dim_x; ++c) row[c] = rng.gaussian();
            norm = row.norm();
        } while (norm < 1e-12);
        row /= norm;
        p.G.row(i) = row;
        const Vector proj = X * row.transpose();
        p.g[i] = -rng.uniform(proj.minCoeff(), proj.maxCoeff());
    }
    auto fill = [&](Matrix& mat) {
        for (Eigen::Index r = 0; r < mat.rows(); ++r)
            for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = rng.gaussian();
    };
    auto fill_vec = [&](Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.gaussian();
    };
    if (arch.kind != ArchKind::mlp) {
        fill(p.U);
        fill_vec(p.u);
    }
    if (arch.kind == ArchKind::gqu) {
        fill(p.Q);
        fill_vec(p.q);
    }
    fill(p.D);
    fill_vec(p.d);
    return p;
}

struct SweepTask {
    int n = 0;
    int restart = 0;
    std::uint64_t seed = 0;
};

struct SweepOutcome {
    double rmse = 0.0;
    StopReason reason = StopReason::max_iters;
    bool ok = false;
};

}  // namespace

std::vector<ScalingRecord> scaling_sweep(ArchKind kind, const Dataset& data,
                                         const SweepConfig& config) {
    require(!config.n_grid.empty(), "empty width grid");
    require(std::is_sorted(config.n_grid.begin(), config.n_grid.end()) &&
                std::adjacent_find(config.n_grid.begin(), config.n_grid.end()) ==
                    config.n_grid.end(),
            "width grid must be strictly increasing");
    require(config.restarts >= 1, "restarts >= 1");
    const int dim_x = static_cast<int>(data.X.cols());
    require(data.Y.cols() == 1, "sweeps support scalar targets");

    std::vector<SweepTask> tasks;
    for (int n : config.n_grid)
        for (int r = 0; r < config.restarts; ++r)
            tasks.push_back({n, r, derive_seed(config.base_seed, static_cast<std::uint64_t>(n),
                                               static_cast<std::uint64_t>(r))});

    std::vector<SweepOutcome> outcomes(tasks.size());
    const double xlo = data.X.col(0).minCoeff();
    const double xhi = data.X.col(0).maxCoeff();

    auto run_task = [&](size_t idx) {
        const SweepTask& task = tasks[idx];
        Architecture arch{kind, dim_x, 1, task.n};
        ModelParams init;
        if (dim_x == 1) {
            PartitionSpec spec{xlo, xhi, task.n, Orientation::alternating};
            init = spline_init(arch, spec, task.seed);
        } else {
            init = random_init_highdim(arch, data.X, task.seed);
        }
        TrainConfig tc = config.train;
        tc.seed = task.seed;
        tc.record_trace = false;
        const TrainReport report = train(init, data.X, data.Y, tc).second;
        outcomes[idx].rmse = report.final_rmse;
        outcomes[idx].reason = report.converged_reason;
        outcomes[idx].ok = report.converged_reason != StopReason::aborted_nonfinite &&
                           std::isfinite(report.final_rmse);
    };

    unsigned workers = config.workers > 0 ? static_cast<unsigned>(config.workers)
                                          : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(tasks.size()));
    if (workers <= 1) {
        for (size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
                    run_task(i);
            });
        for (auto& th : pool) th.join();
    }

    // Best restart per width; ties break toward the smaller seed so records
    // are independent of scheduling.
    std::vector<ScalingRecord> records;
    for (int n : config.n_grid) {
        int best = -1;
        for (size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].n != n) continue;
            if (!outcomes[i].ok) continue;
            if (best < 0 || outcomes[i].rmse < outcomes[best].rmse ||
                (outcomes[i].rmse == outcomes[best].rmse && tasks[i].seed < tasks[best].seed))
                best = static_cast<int>(i);
        }
        ScalingRecord rec;
        rec.arch = kind;
        rec.n = n;
        rec.params = param_count(Architecture{kind, dim_x, 1, n});
        if (best >= 0) {
            rec.rmse = outcomes[best].rmse;
            rec.seed_used = tasks[best].seed;
            rec.converged_reason = outcomes[best].reason;
            rec.converged = true;
        } else {
            // every restart aborted
            size_t first = 0;
            while (first < tasks.size() && tasks[first].n != n) ++first;
            rec.rmse = std::numeric_limits<double>::quiet_NaN();
            rec.seed_used = tasks[first].seed;
            rec.converged_reason = StopReason::aborted_nonfinite;
            rec.converged = false;
        }
        records.push_back(rec);
    }
    return records;
}

SlopeFit try_fit_slope(const std::vector<ScalingRecord>& records, SlopeAxis axis,
                       double rmse_floor) {
    std::vector<double> xs, ys;
    std::vector<std::string> excluded;
    for (const auto& rec : records) {
        char buf[96];
        if (!rec.converged) {
            std::snprintf(buf, sizeof(buf), "n=%d non-converged", rec.n);
            excluded.emplace_back(buf);
            continue;
        }
        if (rec.rmse < rmse_floor) {
            std::snprintf(buf, sizeof(buf), "n=%d floor-hit", rec.n);
            excluded.emplace_back(buf);
            continue;
        }
        xs.push_back(axis == SlopeAxis::neurons ? static_cast<double>(rec.n)
                                                : static_cast<double>(rec.params));
        ys.push_back(rec.rmse);
    }
    SlopeFit fit = fit_loglog(xs, ys, 4);
    fit.excluded.insert(fit.excluded.end(), excluded.begin(), excluded.end());
    if (!fit.ok && fit.message.empty()) fit.message = "fit failed";
    return fit;
}

SlopeFit fit_slope(const std::vector<ScalingRecord>& records, SlopeAxis axis, double rmse_floor) {
    SlopeFit fit = try_fit_slope(records, axis, rmse_floor);
    if (!fit.ok) {
        std::ostringstream msg;
        msg << "slope fit needs >= 4 usable points (" << fit.points_used << " usable";
        for (const auto& e : fit.excluded) msg << "; excluded " << e;
        msg << ")";
        throw std::invalid_argument(msg.str());
    }
    return fit;
}

int monotonicity_violations(const std::vector<ScalingRecord>& records) {
    int violations = 0;
    for (size_t i = 1; i < records.size(); ++i)
        if (records[i].converged && records[i - 1].converged &&
            records[i].rmse > records[i - 1].rmse)
            ++violations;
    return violations;
}

std::string records_csv(const std::vector<ScalingRecord>& records) {
    std::ostringstream out;
    out << "arch,n,params,rmse,seed,converged\n";
    for (const auto& rec : records) {
        out << to_string(rec.arch) << ',' << rec.n << ',' << rec.params << ','
            << format_double(rec.rmse) << ',' << rec.seed_used << ','
            << to_string(rec.converged_reason) << '\n';
    }
    return out.str();
}

void write_records_csv(const std::vector<ScalingRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << records_csv(records);
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<ScalingRecord> parse_records_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty records csv");
    require(trim(line) == "arch,n,params,rmse,seed,converged", "bad records csv header");
    std::vector<ScalingRecord> records;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        require(cells.size() == 6, "bad records csv row");
        ScalingRecord rec;
        rec.arch = arch_kind_from_string(cells[0]);
        rec.n = std::stoi(cells[1]);
        rec.params = std::stoi(cells[2]);
        rec.rmse = std::strtod(cells[3].c_str(), nullptr);
        rec.seed_used = std::stoull(cells[4]);
        rec.converged_reason = StopReason::max_iters;
        for (StopReason reason :
             {StopReason::grad_tol, StopReason::loss_floor, StopReason::max_iters,
              StopReason::line_search_stall, StopReason::aborted_nonfinite})
            if (cells[5] == to_string(reason)) rec.converged_reason = reason;
        rec.converged = rec.converged_reason != StopReason::aborted_nonfinite;
        records.push_back(rec);
    }
    return records;
}

std::vector<int> default_n_grid() { return {2, 3, 4, 6, 8, 11, 16, 22, 32, 45, 50}; }

}  // namespace glukit
