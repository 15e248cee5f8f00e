#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fixture_util.hpp"
#include "qnerf/config.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("QNERF_CLI_BIN");
    REQUIRE_MESSAGE(env != nullptr, "QNERF_CLI_BIN must be set (ctest sets it)");
    return env;
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

CommandResult run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    CommandResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::fgets(buf.data(), int(buf.size()), pipe)) result.output += buf.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

}  // namespace

TEST_CASE("cli: default config dump parses back through the schema") {
    auto r = run_cli("config --dump-default");
    CHECK(r.exit_code == 0);
    auto cfg = qnerf::config::parse_config_text(r.output);
    CHECK(cfg.total_iters == 30000);
    CHECK(cfg.rays_per_batch == 128);
}

TEST_CASE("cli: help text covers every subcommand") {
    auto r = run_cli("--help");
    for (const char* sub : {"train", "render", "eval", "inspect-circuit", "dataset", "fixture"})
        CHECK(r.output.find(sub) != std::string::npos);
}

TEST_CASE("cli: config errors exit with code 2 and a line-precise message") {
    auto dir = testutil::scratch_dir("cli_badcfg");
    std::ofstream(dir / "bad.toml") << "[trainer]\nnot_a_key = 1\n";
    auto r = run_cli("train --config " + (dir / "bad.toml").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("line 2") != std::string::npos);
    CHECK(r.output.find("not_a_key") != std::string::npos);

    auto missing = run_cli("render --config " + (dir / "bad.toml").string() +
                           " --checkpoint /nonexistent.ckpt");
    CHECK(missing.exit_code == 2);
    fs::remove_all(dir);
}

TEST_CASE("cli: inspect-circuit prints the stack structure and parameter count") {
    auto r = run_cli("inspect-circuit --spec 1L+2S --qubits 3 --in-dim 5");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("1L+2S") != std::string::npos);
    CHECK(r.output.find("RZ q0") != std::string::npos);
    CHECK(r.output.find("params") != std::string::npos);

    auto bad = run_cli("inspect-circuit --spec nonsense");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("cli: fixture generation plus dataset inspect") {
    auto dir = testutil::scratch_dir("cli_fixture");
    auto fx = run_cli("fixture --out " + dir.string() + " --views 3 --width 16 --height 12");
    CHECK(fx.exit_code == 0);
    CHECK(fs::exists(dir / "transforms.json"));
    CHECK(fs::exists(dir / "view_0.png"));

    auto inspect = run_cli("dataset inspect --path " + (dir / "transforms.json").string());
    CHECK(inspect.exit_code == 0);
    CHECK(inspect.output.find("frames: 3") != std::string::npos);
    CHECK(inspect.output.find("view_1.png") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cli: train/render/eval round trip on a tiny scene") {
    auto dir = testutil::scratch_dir("cli_roundtrip");
    auto fx = run_cli("fixture --out " + (dir / "scene").string() +
                      " --views 4 --width 16 --height 12");
    REQUIRE(fx.exit_code == 0);

    auto cfg = testutil::tiny_run_config();
    cfg.dataset_path = (dir / "scene" / "transforms.json").string();
    cfg.train_fraction = 0.7;
    cfg.total_iters = 20;
    cfg.eval_every = 0;
    cfg.checkpoint_every = 0;
    cfg.output_dir = (dir / "out").string();
    std::ofstream(dir / "run.toml") << qnerf::config::serialize_config(cfg);

    auto train = run_cli("train --config " + (dir / "run.toml").string());
    CHECK(train.exit_code == 0);
    CHECK(fs::exists(dir / "out" / "checkpoint_final.ckpt"));
    CHECK(fs::exists(dir / "out" / "metrics.csv"));

    auto render = run_cli("render --config " + (dir / "run.toml").string() + " --checkpoint " +
                          (dir / "out" / "checkpoint_final.ckpt").string() + " --float-dump" +
                          " --output-dir " + (dir / "render").string());
    CHECK(render.exit_code == 0);
    bool any_png = false, any_raw = false;
    for (const auto& e : fs::directory_iterator(dir / "render")) {
        any_png = any_png || e.path().extension() == ".png";
        any_raw = any_raw || e.path().extension() == ".raw";
    }
    CHECK(any_png);
    CHECK(any_raw);

    auto eval = run_cli("eval --config " + (dir / "run.toml").string() + " --checkpoint " +
                        (dir / "out" / "checkpoint_final.ckpt").string() + " --hsv" +
                        " --output-dir " + (dir / "eval").string());
    CHECK(eval.exit_code == 0);
    CHECK(fs::exists(dir / "eval" / "report.csv"));
    CHECK(fs::exists(dir / "eval" / "report.txt"));
    CHECK(fs::exists(dir / "eval" / "hsv_report.txt"));
    CHECK(eval.output.find("PSNR") != std::string::npos);

    // Environment variable overrides the output directory.
    const std::string env_out = (dir / "env_out").string();
    const std::string cmd = "QNERF_OUTPUT_DIR=" + env_out + " " + cli_path() +
                            " train --config " + (dir / "run.toml").string() + " > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(fs::path(env_out) / "checkpoint_final.ckpt"));
    fs::remove_all(dir);
}
