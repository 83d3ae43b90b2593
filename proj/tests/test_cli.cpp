// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the glukit binary: exit codes, emitted files, and
// manifest replay determinism.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "glukit/models.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return GLUKIT_CLI_PATH; }

int run(const std::string& args, const std::string& log_path) {
    const std::string cmd = std::string(cli_path()) + " " + args + " > " + log_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_occurrences(const std::string& text, const std::string& needle) {
    int count = 0;
    for (size_t at = text.find(needle); at != std::string::npos;
         at = text.find(needle, at + needle.size()))
        ++count;
    return count;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& child = "") const { return (path / child).string(); }
};

}  // namespace

TEST_CASE("construct writes a loadable checkpoint and reports rmse") {
    TempDir dir("glukit_cli_construct");
    const std::string log = dir.str("log.txt");
    const int code = run("construct --arch glu --target invcos2 --n 16 --out " + dir.str("ck.json"),
                         log);
    CHECK(code == 0);
    const std::string output = slurp(log);
    CHECK(output.find("rmse=") != std::string::npos);
    const glukit::ModelParams p = glukit::load_checkpoint(dir.str("ck.json"));
    CHECK(p.arch.n == 16);
    CHECK(p.arch.kind == glukit::ArchKind::glu);
}

TEST_CASE("construct on an affine target reports machine-precision rmse") {
    TempDir dir("glukit_cli_construct_lin");
    const std::string log = dir.str("log.txt");
    const int code =
        run("construct --arch mlp --target linear --n 4 --out " + dir.str("ck.json"), log);
    CHECK(code == 0);
    const std::string output = slurp(log);
    const auto at = output.find("rmse=");
    REQUIRE(at != std::string::npos);
    CHECK(std::strtod(output.c_str() + at + 5, nullptr) < 1e-12);
}

TEST_CASE("construct refuses the gqu") {
    TempDir dir("glukit_cli_gqu");
    const std::string log = dir.str("log.txt");
    const int code = run("construct --arch gqu --target invcos2 --n 4", log);
    CHECK(code == 2);
    CHECK(slurp(log).find("no analytical construction") != std::string::npos);
}

TEST_CASE("viz renders knot lines and neuron traces") {
    TempDir dir("glukit_cli_viz");
    const std::string log = dir.str("log.txt");
    REQUIRE(run("construct --arch glu --target invcos2 --n 6 --out " + dir.str("ck.json"), log) ==
            0);
    REQUIRE(run("viz --checkpoint " + dir.str("ck.json") + " --target invcos2 --out " +
                    dir.str("model.svg"),
                log) == 0);
    const std::string svg = slurp(dir.str("model.svg"));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(count_occurrences(svg, "class=\"knot\"") == 6);
    CHECK(count_occurrences(svg, "class=\"neuron\"") == 6);
}

TEST_CASE("viz renders hinge segments for a 2d checkpoint") {
    TempDir dir("glukit_cli_viz2d");
    // build a 2d checkpoint directly
    glukit::ModelParams p = glukit::zero_params({glukit::ArchKind::glu, 2, 1, 4});
    p.G << 1, 0, 0, 1, 1, 1, 1, -1;
    p.g << 0.2, -0.3, 0.1, 0.0;
    p.U.setConstant(0.5);
    p.u.setConstant(0.1);
    p.D.setConstant(1.0);
    glukit::save_checkpoint(p, dir.str("ck2d.json"));
    const std::string log = dir.str("log.txt");
    REQUIRE(run("viz --checkpoint " + dir.str("ck2d.json") + " --out " + dir.str("surf.svg"),
                log) == 0);
    const std::string svg = slurp(dir.str("surf.svg"));
    CHECK(count_occurrences(svg, "class=\"hinge\"") == 4);
}

TEST_CASE("sweep rejects a too-small width grid") {
    TempDir dir("glukit_cli_grid");
    const std::string log = dir.str("log.txt");
    const int code = run("sweep --target invcos2 --n-grid 2 --out-dir " + dir.str("out"), log);
    CHECK(code == 2);
    CHECK(slurp(log).find(">= 4 widths") != std::string::npos);
}

TEST_CASE("sweep emits records, slopes, plots and a replayable manifest") {
    TempDir dir("glukit_cli_sweep");
    const std::string log = dir.str("log.txt");
    const std::string base =
        "sweep --arch mlp,glu --target invcos2 --n-grid 2,3,4,6 --points 800 --restarts 2 "
        "--max-iters 30 --workers 2 --seeds 5";
    REQUIRE(run(base + " --out-dir " + dir.str("a"), log) == 0);
    for (const char* name : {"manifest.json", "records.csv", "slopes.json",
                             "scaling_neurons.svg", "scaling_params.svg"})
        CHECK(fs::exists(dir.path / "a" / name));

    // replay from the manifest: byte-identical records
    REQUIRE(run("rerun " + dir.str("a/manifest.json") + " --out-dir " + dir.str("b"), log) == 0);
    CHECK(slurp(dir.str("a/records.csv")) == slurp(dir.str("b/records.csv")));
    CHECK(slurp(dir.str("a/slopes.json")) == slurp(dir.str("b/slopes.json")));

    const std::string records = slurp(dir.str("a/records.csv"));
    CHECK(records.rfind("arch,n,params,rmse,seed,converged\n", 0) == 0);
    CHECK(count_occurrences(records, "\nmlp,") + count_occurrences(records, "\nglu,") == 8);
}

TEST_CASE("unknown flags and missing files use distinct exit codes") {
    TempDir dir("glukit_cli_codes");
    const std::string log = dir.str("log.txt");
    CHECK(run("sweep --no-such-flag", log) == 2);
    CHECK(run("viz --checkpoint " + dir.str("missing.json"), log) == 4);
    CHECK(run("construct --arch mlp --target nosuch --n 4", log) == 2);
}
