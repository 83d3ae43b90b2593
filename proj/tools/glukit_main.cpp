// SPDX-License-Identifier: Apache-2.0
//
// glukit command line: analytical constructions, width-scaling sweeps and
// SVG views of gated models.
//
//   glukit construct --arch glu --target invcos2 --n 16 --out ck.json
//   glukit sweep --arch mlp,glu,gqu --target invcos2 --out-dir results/
//   glukit viz --checkpoint ck.json --target invcos2 --out model.svg
//   glukit rerun results/manifest.json --out-dir replay/
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 i/o failure.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glukit/construct.hpp"
#include "glukit/experiments.hpp"
#include "glukit/manifest.hpp"
#include "glukit/models.hpp"
#include "glukit/svg.hpp"
#include "glukit/train.hpp"

namespace fs = std::filesystem;
using namespace glukit;

namespace {

struct NumericalError : std::exception {
    explicit NumericalError(std::string msg) : message(std::move(msg)) {}
    const char* what() const noexcept override { return message.c_str(); }
    std::string message;
};

std::string default_out_dir() {
    const char* env = std::getenv("GLUKIT_OUT_DIR");
    return env && *env ? env : "glukit-out";
}

std::pair<double, double> parse_range(const std::string& text, const char* what) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument(std::string(what) + " must be lo:hi, got " + text);
    char* end = nullptr;
    const double lo = std::strtod(text.c_str(), &end);
    const double hi = std::strtod(text.c_str() + colon + 1, &end);
    if (!(hi > lo)) throw std::invalid_argument(std::string(what) + " must satisfy lo < hi");
    return {lo, hi};
}

// --- sweep -------------------------------------------------------------------

struct SweepOptions {
    std::vector<std::string> archs{"mlp", "glu", "gqu"};
    std::string target = "invcos2";
    std::string dataset_csv;
    std::vector<std::string> feature_cols;
    std::string target_col;
    bool normalize = false;
    std::string domain = "-1:1";
    std::vector<int> n_grid = default_n_grid();
    int points = 10000;
    std::uint64_t seed = 1;
    int restarts = 4;
    std::vector<std::string> freeze;
    int workers = 0;
    int max_iters = 200;
    double tol_grad = 1e-13;
    double tol_floor = 1e-26;
    double tol_singular = 1e-12;
    std::string out_dir = default_out_dir();
};

nlohmann::json sweep_config_json(const SweepOptions& opt) {
    nlohmann::json j;
    j["archs"] = opt.archs;
    j["target"] = opt.target;
    j["dataset_csv"] = opt.dataset_csv;
    j["feature_cols"] = opt.feature_cols;
    j["target_col"] = opt.target_col;
    j["normalize"] = opt.normalize;
    j["domain"] = opt.domain;
    j["n_grid"] = opt.n_grid;
    j["points"] = opt.points;
    j["seed"] = opt.seed;
    j["restarts"] = opt.restarts;
    j["freeze"] = opt.freeze;
    j["workers"] = opt.workers;
    j["max_iters"] = opt.max_iters;
    j["tol_grad"] = opt.tol_grad;
    j["tol_floor"] = opt.tol_floor;
    j["tol_singular"] = opt.tol_singular;
    return j;
}

SweepOptions sweep_options_from_json(const nlohmann::json& j) {
    SweepOptions opt;
    opt.archs = j.at("archs").get<std::vector<std::string>>();
    opt.target = j.at("target").get<std::string>();
    opt.dataset_csv = j.at("dataset_csv").get<std::string>();
    opt.feature_cols = j.at("feature_cols").get<std::vector<std::string>>();
    opt.target_col = j.at("target_col").get<std::string>();
    opt.normalize = j.at("normalize").get<bool>();
    opt.domain = j.at("domain").get<std::string>();
    opt.n_grid = j.at("n_grid").get<std::vector<int>>();
    opt.points = j.at("points").get<int>();
    opt.seed = j.at("seed").get<std::uint64_t>();
    opt.restarts = j.at("restarts").get<int>();
    opt.freeze = j.at("freeze").get<std::vector<std::string>>();
    opt.workers = j.at("workers").get<int>();
    opt.max_iters = j.at("max_iters").get<int>();
    opt.tol_grad = j.at("tol_grad").get<double>();
    opt.tol_floor = j.at("tol_floor").get<double>();
    opt.tol_singular = j.at("tol_singular").get<double>();
    return opt;
}

Dataset build_dataset(const SweepOptions& opt) {
    Dataset data;
    if (!opt.dataset_csv.empty()) {
        if (opt.feature_cols.empty() || opt.target_col.empty())
            throw std::invalid_argument("--dataset-csv requires --feature-cols and --target-col");
        data = load_csv(opt.dataset_csv, opt.feature_cols, opt.target_col, opt.normalize);
        return data;
    }
    const auto [lo, hi] = parse_range(opt.domain, "--domain");
    if (opt.target == "friedman1" || opt.target == "friedman2" || opt.target == "friedman3") {
        data = friedman(opt.target.back() - '0', opt.points, opt.seed);
    } else {
        data = sample_target(target_by_name(opt.target), opt.points, opt.seed, lo, hi);
    }
    if (opt.normalize) normalize_features(data);
    return data;
}

int run_sweep(const SweepOptions& opt, const std::string& rerun_manifest = "") {
    if (opt.n_grid.size() < 4) throw std::invalid_argument("need >= 4 widths in --n-grid");
    if (opt.restarts < 1) throw std::invalid_argument("--restarts must be >= 1");

    fs::create_directories(opt.out_dir);

    RunManifest manifest;
    manifest.command = "sweep";
    manifest.config = sweep_config_json(opt);
    if (!opt.dataset_csv.empty())
        manifest.input_hashes[opt.dataset_csv] = fnv1a_file_hex(opt.dataset_csv);
    manifest.outputs = {"records.csv", "slopes.json", "scaling_neurons.svg",
                        "scaling_params.svg"};
    if (!rerun_manifest.empty()) {
        // replaying: the recorded input must be unchanged
        const RunManifest original = load_manifest(rerun_manifest);
        for (const auto& [path, hash] : original.input_hashes)
            if (fnv1a_file_hex(path) != hash)
                throw std::invalid_argument("input file changed since manifest was written: " +
                                            path);
    }
    save_manifest(manifest, (fs::path(opt.out_dir) / "manifest.json").string());

    const Dataset data = build_dataset(opt);

    SweepConfig config;
    config.n_grid = opt.n_grid;
    config.restarts = opt.restarts;
    config.base_seed = opt.seed;
    config.workers = opt.workers;
    config.train.max_outer_iters = opt.max_iters;
    config.train.grad_tol = opt.tol_grad;
    config.train.loss_floor = opt.tol_floor;
    config.train.singular_diag_threshold = opt.tol_singular;
    config.train.trainable_blocks = {Block::head, Block::values, Block::gates};
    for (const auto& name : opt.freeze) {
        const Block frozen = block_from_string(name);
        std::erase(config.train.trainable_blocks, frozen);
    }
    if (config.train.trainable_blocks.empty())
        throw std::invalid_argument("--freeze removed every trainable block");

    std::vector<ScalingRecord> all_records;
    std::map<std::string, std::map<std::string, SlopeFit>> slope_map;
    std::vector<svg::Series> series_n, series_p;
    int aborted = 0;

    for (const auto& arch_name : opt.archs) {
        const ArchKind kind = arch_kind_from_string(arch_name);
        const auto records = scaling_sweep(kind, data, config);
        for (const auto& rec : records)
            if (!rec.converged) ++aborted;

        const SlopeFit fit_n = try_fit_slope(records, SlopeAxis::neurons);
        const SlopeFit fit_p = try_fit_slope(records, SlopeAxis::params);
        slope_map[arch_name]["neurons"] = fit_n;
        slope_map[arch_name]["params"] = fit_p;

        svg::Series sn, sp;
        sn.label = sp.label = arch_name;
        for (const auto& rec : records) {
            if (!rec.converged) continue;
            sn.xs.push_back(rec.n);
            sn.ys.push_back(rec.rmse);
            sp.xs.push_back(rec.params);
            sp.ys.push_back(rec.rmse);
        }
        sn.color = sp.color = "";
        if (fit_n.ok) sn.fit = {{fit_n.slope, fit_n.intercept}};
        if (fit_p.ok) sp.fit = {{fit_p.slope, fit_p.intercept}};
        series_n.push_back(sn);
        series_p.push_back(sp);

        all_records.insert(all_records.end(), records.begin(), records.end());
        std::printf("sweep arch=%s points=%d slope_neurons=%s slope_params=%s\n",
                    arch_name.c_str(), static_cast<int>(data.X.rows()),
                    fit_n.ok ? std::to_string(fit_n.slope).c_str() : "n/a",
                    fit_p.ok ? std::to_string(fit_p.slope).c_str() : "n/a");
    }

    write_records_csv(all_records, (fs::path(opt.out_dir) / "records.csv").string());

    std::string slopes = "{";
    bool first_arch = true;
    for (const auto& [arch_name, fits] : slope_map) {
        if (!first_arch) slopes += ", ";
        first_arch = false;
        slopes += "\"" + arch_name + "\": {\"neurons\": " + slope_fit_json(fits.at("neurons")) +
                  ", \"params\": " + slope_fit_json(fits.at("params")) + "}";
    }
    slopes += "}\n";
    svg::write_file((fs::path(opt.out_dir) / "slopes.json").string(), slopes);

    svg::write_file((fs::path(opt.out_dir) / "scaling_neurons.svg").string(),
                    svg::loglog_plot(series_n, "RMSE vs neuron count (" + data.name + ")",
                                     "neurons", "RMSE"));
    svg::write_file((fs::path(opt.out_dir) / "scaling_params.svg").string(),
                    svg::loglog_plot(series_p, "RMSE vs parameter count (" + data.name + ")",
                                     "parameters", "RMSE"));

    if (aborted == static_cast<int>(all_records.size()) && aborted > 0)
        throw NumericalError("every sweep entry aborted with non-finite loss");
    return 0;
}

// --- construct ---------------------------------------------------------------

int run_construct(const std::string& arch_name, const std::string& target_name, int n,
                  const std::string& domain, std::string out_path) {
    const ArchKind kind = arch_kind_from_string(arch_name);
    if (kind == ArchKind::gqu)
        throw std::invalid_argument("no analytical construction for gqu (train it instead)");
    const auto [lo, hi] = parse_range(domain, "--domain");
    const TargetFunction target = target_by_name(target_name);
    if (target.dim_x != 1)
        throw std::invalid_argument("analytical constructions are 1D; target " + target_name +
                                    " has dim_x > 1");

    const ModelParams params = kind == ArchKind::mlp ? construct_mlp(target, n, lo, hi)
                                                     : construct_glu(target, n, lo, hi);
    const double err = dense_grid_rmse(params, target, lo, hi);
    if (!std::isfinite(err)) throw NumericalError("construction produced a non-finite error");

    if (out_path.empty()) {
        fs::create_directories(default_out_dir());
        out_path = (fs::path(default_out_dir()) /
                    ("construct_" + arch_name + "_" + target_name + "_n" + std::to_string(n) +
                     ".json"))
                       .string();
    }
    save_checkpoint(params, out_path);
    std::printf("construct arch=%s target=%s n=%d rmse=%.17g checkpoint=%s\n", arch_name.c_str(),
                target_name.c_str(), n, err, out_path.c_str());
    return 0;
}

// --- viz ----------------------------------------------------------------------

int run_viz(const std::string& checkpoint, const std::string& target_name,
            const std::string& domain, const std::string& box_text, int grid,
            std::string out_path) {
    const ModelParams params = load_checkpoint(checkpoint);
    if (out_path.empty()) {
        fs::create_directories(default_out_dir());
        out_path = (fs::path(default_out_dir()) / "model.svg").string();
    }
    if (params.arch.dim_x == 1) {
        const auto [lo, hi] = parse_range(domain, "--domain");
        std::optional<TargetFunction> target;
        if (!target_name.empty()) target = target_by_name(target_name);
        svg::write_file(out_path,
                        svg::model_view_1d(params, target ? &*target : nullptr, lo, hi));
    } else if (params.arch.dim_x == 2) {
        std::array<double, 4> box{-1.0, 1.0, -1.0, 1.0};
        if (!box_text.empty()) {
            // x0:x1:y0:y1
            std::array<double, 4> vals{};
            size_t start = 0;
            for (int i = 0; i < 4; ++i) {
                const size_t colon = box_text.find(':', start);
                const std::string tok = box_text.substr(
                    start, colon == std::string::npos ? std::string::npos : colon - start);
                if (tok.empty()) throw std::invalid_argument("--box must be x0:x1:y0:y1");
                vals[i] = std::strtod(tok.c_str(), nullptr);
                if (colon == std::string::npos && i < 3)
                    throw std::invalid_argument("--box must be x0:x1:y0:y1");
                start = colon + 1;
            }
            box = vals;
        }
        svg::write_file(out_path, svg::model_view_2d(params, box, grid));
    } else {
        throw std::invalid_argument("viz supports dim_x in {1, 2}");
    }
    std::printf("viz checkpoint=%s out=%s\n", checkpoint.c_str(), out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gated-unit scaling laboratory"};
    app.require_subcommand(1);

    // construct
    auto* construct_cmd =
        app.add_subcommand("construct", "analytical spline construction, no training");
    std::string c_arch = "glu", c_target = "invcos2", c_domain = "-1:1", c_out;
    int c_n = 16;
    construct_cmd->add_option("--arch", c_arch, "mlp or glu")->required();
    construct_cmd->add_option("--target", c_target, "target function name");
    construct_cmd->add_option("--n", c_n, "neuron count")->required()->check(CLI::PositiveNumber);
    construct_cmd->add_option("--domain", c_domain, "construction interval lo:hi");
    construct_cmd->add_option("--out", c_out, "checkpoint output path");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "width-scaling sweep with slope fits");
    SweepOptions opt;
    sweep_cmd->add_option("--arch", opt.archs, "architectures to sweep")->delimiter(',');
    sweep_cmd->add_option("--target", opt.target,
                          "synthetic target (invcos2, sin4xy, friedman1/2/3, ...)");
    sweep_cmd->add_option("--dataset-csv", opt.dataset_csv, "CSV dataset instead of a target");
    sweep_cmd->add_option("--feature-cols", opt.feature_cols, "CSV feature column names")
        ->delimiter(',');
    sweep_cmd->add_option("--target-col", opt.target_col, "CSV target column name");
    sweep_cmd->add_flag("--normalize", opt.normalize, "standardize features");
    sweep_cmd->add_option("--domain", opt.domain, "sampling interval lo:hi per input dim");
    sweep_cmd->add_option("--n-grid", opt.n_grid, "width grid")->delimiter(',');
    sweep_cmd->add_option("--points", opt.points, "synthetic sample count");
    sweep_cmd->add_option("--seeds", opt.seed, "base seed");
    sweep_cmd->add_option("--restarts", opt.restarts, "random restarts per width");
    sweep_cmd->add_option("--freeze", opt.freeze, "blocks kept at init: gates,values,head")
        ->delimiter(',');
    sweep_cmd->add_option("--workers", opt.workers, "parallel workers (0 = cores)");
    sweep_cmd->add_option("--max-iters", opt.max_iters, "outer iteration budget");
    sweep_cmd->add_option("--tol-grad", opt.tol_grad, "gradient inf-norm stop");
    sweep_cmd->add_option("--tol-floor", opt.tol_floor, "MSE stop floor");
    sweep_cmd->add_option("--tol-singular", opt.tol_singular,
                          "relative diagonal elimination threshold");
    sweep_cmd->add_option("--out-dir", opt.out_dir, "output directory (env GLUKIT_OUT_DIR)");

    // viz
    auto* viz_cmd = app.add_subcommand("viz", "render a checkpoint as SVG");
    std::string v_checkpoint, v_target, v_domain = "-1:1", v_box, v_out;
    int v_grid = 64;
    viz_cmd->add_option("--checkpoint", v_checkpoint, "checkpoint path")->required();
    viz_cmd->add_option("--target", v_target, "overlay target curve (1D)");
    viz_cmd->add_option("--domain", v_domain, "1D plot interval lo:hi");
    viz_cmd->add_option("--box", v_box, "2D box x0:x1:y0:y1");
    viz_cmd->add_option("--grid", v_grid, "2D heatmap resolution");
    viz_cmd->add_option("--out", v_out, "SVG output path");

    // rerun
    auto* rerun_cmd = app.add_subcommand("rerun", "replay a sweep from its manifest");
    std::string r_manifest, r_out_dir;
    rerun_cmd->add_option("manifest", r_manifest, "manifest.json path")->required();
    rerun_cmd->add_option("--out-dir", r_out_dir, "override output directory");

    try {
        app.parse(argc, argv);
        if (construct_cmd->parsed())
            return run_construct(c_arch, c_target, c_n, c_domain, c_out);
        if (sweep_cmd->parsed()) return run_sweep(opt);
        if (viz_cmd->parsed())
            return run_viz(v_checkpoint, v_target, v_domain, v_box, v_grid, v_out);
        if (rerun_cmd->parsed()) {
            const RunManifest manifest = load_manifest(r_manifest);
            if (manifest.command != "sweep")
                throw std::invalid_argument("manifest command is not a sweep");
            SweepOptions replay = sweep_options_from_json(manifest.config);
            if (!r_out_dir.empty()) replay.out_dir = r_out_dir;
            return run_sweep(replay, r_manifest);
        }
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
