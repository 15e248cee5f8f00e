#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "qnerf/config.hpp"
#include "qnerf/fixture.hpp"
#include "qnerf/trainer.hpp"

namespace fs = std::filesystem;
using namespace qnerf;

namespace {

// Output directory: env override > flag > config.
std::string resolve_output_dir(const config::RunConfig& cfg, const std::string& flag_dir) {
    if (const char* env = std::getenv("QNERF_OUTPUT_DIR"); env && *env) return env;
    if (!flag_dir.empty()) return flag_dir;
    return cfg.output_dir;
}

data::Dataset load_run_dataset(const config::RunConfig& cfg, bool load_images = true) {
    if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is not set");
    data::LoadOptions opts;
    if (cfg.downsample_width > 0 && cfg.downsample_height > 0)
        opts.target_size = {{cfg.downsample_width, cfg.downsample_height}};
    opts.split.train_fraction = cfg.train_fraction;
    opts.split.seed = cfg.split_seed;
    opts.load_images = load_images;
    return data::load_dataset(cfg.dataset_path, opts);
}

int cmd_train(const std::string& config_path, const std::string& flag_out) {
    auto cfg = config::parse_config_file(config_path);
    auto out_dir = resolve_output_dir(cfg, flag_out);
    fs::create_directories(out_dir);

    auto dataset = load_run_dataset(cfg);
    train::Trainer trainer(cfg, std::move(dataset));
    train::MetricsLog log((fs::path(out_dir) / "metrics.csv").string());

    std::cout << "training " << cfg.variant << " for " << cfg.total_iters << " iterations ("
              << trainer.dataset().train_indices.size() << " train / "
              << trainer.dataset().eval_indices.size() << " eval views)\n";

    for (int64_t i = 0; i < cfg.total_iters; ++i) {
        auto report = trainer.train_step();
        double eval_psnr = -1, eval_ssim = -1;
        const bool do_eval = cfg.eval_every > 0 && trainer.step() % cfg.eval_every == 0 &&
                             !trainer.dataset().eval_indices.empty();
        if (do_eval) {
            auto metrics = trainer.evaluate();
            eval_psnr = metrics.mean_psnr;
            eval_ssim = metrics.mean_ssim;
            std::cout << "step " << trainer.step() << "  loss " << report.total << "  psnr "
                      << eval_psnr << "\n";
        }
        log.append(trainer.step(), report, eval_psnr, eval_ssim);
        if (cfg.checkpoint_every > 0 && trainer.step() % cfg.checkpoint_every == 0)
            trainer.save_checkpoint(
                (fs::path(out_dir) / ("checkpoint_" + std::to_string(trainer.step()) + ".ckpt"))
                    .string());
    }
    trainer.save_checkpoint((fs::path(out_dir) / "checkpoint_final.ckpt").string());

    if (!trainer.dataset().eval_indices.empty()) {
        auto metrics = trainer.evaluate();
        std::ofstream report((fs::path(out_dir) / "report.csv").string());
        report << metrics::report_csv(metrics);
        std::cout << "final mean PSNR " << metrics.mean_psnr << "  SSIM " << metrics.mean_ssim
                  << "\n";
    }
    std::cout << "artifacts written to " << out_dir << "\n";
    return 0;
}

int cmd_render(const std::string& config_path, const std::string& checkpoint,
               std::vector<int> views, bool float_dump, const std::string& flag_out) {
    auto cfg = config::parse_config_file(config_path);
    auto out_dir = resolve_output_dir(cfg, flag_out);
    fs::create_directories(out_dir);
    if (!fs::exists(checkpoint)) throw ConfigError("missing checkpoint: " + checkpoint);

    auto dataset = load_run_dataset(cfg);
    train::Trainer trainer(cfg, std::move(dataset));
    trainer.load_checkpoint(checkpoint);

    if (views.empty()) views = trainer.dataset().eval_indices;
    for (int v : views) {
        if (v < 0 || v >= int(trainer.dataset().frames.size()))
            throw ConfigError("view index out of range: " + std::to_string(v));
        auto image = trainer.render_view(trainer.dataset().frames[std::size_t(v)].camera);
        const auto base = fs::path(out_dir) / ("view_" + std::to_string(v));
        img::save_png(base.string() + ".png", image);
        if (float_dump) img::save_float_dump(base.string() + ".raw", image);
        std::cout << "rendered view " << v << " -> " << base.string() << ".png\n";
    }
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint, bool hsv,
             const std::vector<std::string>& extra_metrics, const std::string& flag_out) {
    auto cfg = config::parse_config_file(config_path);
    auto out_dir = resolve_output_dir(cfg, flag_out);
    fs::create_directories(out_dir);
    if (!fs::exists(checkpoint)) throw ConfigError("missing checkpoint: " + checkpoint);

    auto dataset = load_run_dataset(cfg);
    train::Trainer trainer(cfg, std::move(dataset));
    trainer.load_checkpoint(checkpoint);

    auto metrics = trainer.evaluate();
    std::string csv = metrics::report_csv(metrics);
    for (const auto& spec : extra_metrics) {
        // NAME=FILE with "view,value" rows appends an external per-view column.
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("--extra expects NAME=FILE");
        csv += "# external metric " + spec.substr(0, eq) + "\n";
        std::ifstream in(spec.substr(eq + 1));
        if (!in) throw ConfigError("cannot open external metric file: " + spec.substr(eq + 1));
        std::string line;
        while (std::getline(in, line)) csv += line + "\n";
    }
    std::ofstream((fs::path(out_dir) / "report.csv").string()) << csv;

    metrics::TableRow row;
    const bool quantum_color = cfg.variant == "q-color" || cfg.variant == "q-both";
    auto spec = config::make_color_stack_spec(cfg);
    row.config = cfg.variant + (quantum_color ? " " + qiren::format_spec(spec) : "");
    row.layers = quantum_color ? spec.layers : int(cfg.color_hidden.size());
    row.width = quantum_color ? spec.n_qubits : int(cfg.color_hidden.empty() ? 0 : cfg.color_hidden[0]);
    row.params = trainer.field_model().count_color_params();
    row.psnr = metrics.mean_psnr;
    row.ssim = metrics.mean_ssim;
    const std::string table = metrics::report_table({row});
    std::ofstream((fs::path(out_dir) / "report.txt").string()) << table;
    std::cout << table;

    if (hsv && !trainer.dataset().eval_indices.empty()) {
        const int v = trainer.dataset().eval_indices[0];
        auto rendered = trainer.render_view(trainer.dataset().frames[std::size_t(v)].camera);
        auto text = metrics::hsv_ks_report(trainer.dataset().frames[std::size_t(v)].image,
                                           rendered, "GT", cfg.variant);
        std::ofstream((fs::path(out_dir) / "hsv_report.txt").string()) << text;
        std::cout << text;
    }
    return 0;
}

int cmd_inspect_circuit(const std::string& config_path, const std::string& spec_str, int qubits,
                        int in_dim, const std::string& head) {
    if (!config_path.empty()) {
        auto cfg = config::parse_config_file(config_path);
        diff::ParamStore store;
        Rng rng(derive_seed(cfg.seed, 0xF1E1D));
        auto field_cfg = config::make_field_config(cfg, 1);
        auto field = field::Field::build(store, field_cfg, rng);
        const bool qc = field_cfg.variant == field::Variant::QuantumColor ||
                        field_cfg.variant == field::Variant::QuantumBoth;
        const bool qd = field_cfg.variant == field::Variant::QuantumDensity ||
                        field_cfg.variant == field::Variant::QuantumBoth;
        bool printed = false;
        if (qc && (head.empty() || head == "color")) {
            diff::ParamStore s2;
            auto stack = qiren::QirenStack::build(s2, "color", field_cfg.q_color,
                                                  field_cfg.geo_dim + 3, 3, rng);
            std::cout << "color head\n" << stack.describe();
            printed = true;
        }
        if (qd && (head.empty() || head == "density")) {
            diff::ParamStore s2;
            const int d_in = field_cfg.density_encoder == field::DensityEncoder::Positional
                                 ? field_cfg.positional.out_dim()
                                 : field_cfg.hash.out_dim();
            auto stack = qiren::QirenStack::build(s2, "density", field_cfg.q_density, d_in,
                                                  1 + field_cfg.geo_dim, rng);
            std::cout << "density head\n" << stack.describe();
            printed = true;
        }
        if (!printed) std::cout << "variant '" << cfg.variant << "' has no quantum circuits\n";
        return 0;
    }
    diff::ParamStore store;
    Rng rng(1);
    auto spec = qiren::parse_spec(spec_str);
    spec.n_qubits = qubits;
    auto stack = qiren::QirenStack::build(store, "stack", spec, in_dim, 3, rng);
    std::cout << stack.describe();
    return 0;
}

int cmd_dataset_inspect(const std::string& config_path, const std::string& manifest) {
    if (!manifest.empty()) {
        data::LoadOptions opts;
        opts.load_images = false;
        std::cout << data::load_dataset(manifest, opts).summary();
        return 0;
    }
    auto cfg = config::parse_config_file(config_path);
    std::cout << load_run_dataset(cfg, /*load_images=*/false).summary();
    return 0;
}

int cmd_fixture(const std::string& out_dir, int views, int width, int height, uint64_t seed) {
    fixture::SceneOptions opts;
    opts.n_views = views;
    opts.width = width;
    opts.height = height;
    opts.seed = seed;
    auto manifest = fixture::write_scene(out_dir, opts);
    std::cout << "wrote " << manifest << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid quantum-classical radiance field toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint, spec_str = "1L+2S", head, manifest;
    std::vector<int> views;
    std::vector<std::string> extra_metrics;
    bool float_dump = false, hsv = false, dump_config = false;
    int qubits = 8, in_dim = 18, fx_views = 8, fx_w = 64, fx_h = 36;
    uint64_t fx_seed = 0;

    auto* train_cmd = app.add_subcommand("train", "optimize a field from a config file");
    train_cmd->add_option("--config", config_path, "run configuration (TOML-style)")->required();
    train_cmd->add_option("--output-dir", out_dir, "artifact directory override");

    auto* render_cmd = app.add_subcommand("render", "render views from a checkpoint");
    render_cmd->add_option("--config", config_path)->required();
    render_cmd->add_option("--checkpoint", checkpoint)->required();
    render_cmd->add_option("--views", views, "frame indices (default: eval split)");
    render_cmd->add_flag("--float-dump", float_dump, "also write exact float32 dumps");
    render_cmd->add_option("--output-dir", out_dir);

    auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM (and HSV/KS) report");
    eval_cmd->add_option("--config", config_path)->required();
    eval_cmd->add_option("--checkpoint", checkpoint)->required();
    eval_cmd->add_flag("--hsv", hsv, "emit the HSV channel KS report");
    eval_cmd->add_option("--extra", extra_metrics,
                         "NAME=FILE external per-view metric to merge into the CSV");
    eval_cmd->add_option("--output-dir", out_dir);

    auto* inspect_cmd = app.add_subcommand("inspect-circuit", "print gate lists and slot maps");
    inspect_cmd->add_option("--config", config_path, "derive circuits from a run config");
    inspect_cmd->add_option("--spec", spec_str, "stack spec, e.g. 2L+4S");
    inspect_cmd->add_option("--qubits", qubits);
    inspect_cmd->add_option("--in-dim", in_dim);
    inspect_cmd->add_option("--head", head, "color | density (config mode)");

    auto* dataset_cmd = app.add_subcommand("dataset", "dataset utilities");
    auto* ds_inspect = dataset_cmd->add_subcommand("inspect", "frame and pose summary");
    ds_inspect->add_option("--config", config_path);
    ds_inspect->add_option("--path", manifest, "camera manifest path");

    auto* fixture_cmd = app.add_subcommand("fixture", "write the synthetic sphere scene");
    fixture_cmd->add_option("--out", out_dir)->required();
    fixture_cmd->add_option("--views", fx_views);
    fixture_cmd->add_option("--width", fx_w);
    fixture_cmd->add_option("--height", fx_h);
    fixture_cmd->add_option("--seed", fx_seed);

    auto* config_cmd = app.add_subcommand("config", "configuration helpers");
    config_cmd->add_flag("--dump-default", dump_config, "print the full default config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, out_dir);
        if (render_cmd->parsed())
            return cmd_render(config_path, checkpoint, views, float_dump, out_dir);
        if (eval_cmd->parsed())
            return cmd_eval(config_path, checkpoint, hsv, extra_metrics, out_dir);
        if (inspect_cmd->parsed())
            return cmd_inspect_circuit(config_path, spec_str, qubits, in_dim, head);
        if (dataset_cmd->parsed()) {
            if (config_path.empty() && manifest.empty())
                throw ConfigError("dataset inspect needs --config or --path");
            return cmd_dataset_inspect(config_path, manifest);
        }
        if (fixture_cmd->parsed()) return cmd_fixture(out_dir, fx_views, fx_w, fx_h, fx_seed);
        if (config_cmd->parsed()) {
            if (dump_config) std::cout << config::serialize_config(config::RunConfig{});
            else std::cout << config::config_reference();
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
