#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qnerf/config.hpp"

using namespace qnerf;
using namespace qnerf::config;

TEST_CASE("config: defaults mirror the reference protocol") {
    RunConfig cfg;
    CHECK(cfg.total_iters == 30000);
    CHECK(cfg.rays_per_batch == 128);
    CHECK(cfg.eval_rays_per_batch == 64);
    CHECK(cfg.proposal_stages == std::vector<int64_t>{256, 96});
    CHECK(cfg.proposal_update_every == 5);
    CHECK(cfg.anneal_slope == 10.0);
    CHECK(cfg.anneal_warmup == 1000);
    CHECK(cfg.peak_lr == 1e-2);
    CHECK(cfg.final_lr == 1e-4);
    CHECK(cfg.pre_warmup_lr == 1e-8);
    CHECK(cfg.warmup_steps == 0);
    CHECK(cfg.train_fraction == 0.9);
    CHECK(cfg.proposal_hidden == std::vector<int64_t>{16, 16});
    CHECK(cfg.proposal_table_log2 == std::vector<int64_t>{17, 17});
    CHECK(cfg.proposal_max_res == std::vector<int64_t>{128, 256});
}

TEST_CASE("config: parse -> serialize -> parse is lossless") {
    RunConfig cfg;
    cfg.dataset_path = "scenes/poster/transforms.json";
    cfg.variant = "q-color";
    cfg.color_spec = "3L+4S";
    cfg.table_compat = true;
    cfg.peak_lr = 0.0123456789012345;
    cfg.proposal_stages = {64, 32};
    cfg.seed = 977;

    const std::string text = serialize_config(cfg);
    RunConfig back = parse_config_text(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.variant == "q-color");
    CHECK(back.peak_lr == cfg.peak_lr);
    CHECK(back.proposal_stages == cfg.proposal_stages);
    CHECK(back.seed == 977);
    CHECK(back.table_compat);
}

TEST_CASE("config: unknown keys and sections are rejected with line numbers") {
    CHECK_THROWS_WITH_AS(parse_config_text("[trainer]\nbogus_key = 3\n"),
                         "line 2: unknown key 'trainer.bogus_key'", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("[nonsense]\n"), "line 1: unknown section [nonsense]",
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("seed = 3\n"),
                         "line 1: key 'seed' outside any section", ConfigError);
    CHECK_THROWS_AS(parse_config_text("[trainer]\nseed = \"nope\"\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[trainer]\nseed 3\n"), ConfigError);
}

TEST_CASE("config: comments, whitespace, int-to-float promotion") {
    auto cfg = parse_config_text(
        "# top comment\n"
        "[trainer]\n"
        "peak_lr = 1   # integer accepted for a float key\n"
        "  seed =  7\n"
        "\n"
        "[sampling]\n"
        "stages = [ 32, 16 ]\n");
    CHECK(cfg.peak_lr == 1.0);
    CHECK(cfg.seed == 7);
    CHECK(cfg.proposal_stages == std::vector<int64_t>{32, 16});
}

TEST_CASE("config: assembled module configs") {
    RunConfig cfg;
    cfg.variant = "q-density";
    cfg.encoding_kind = "positional";
    cfg.density_spec = "2L+2S";
    cfg.n_qubits = 4;
    auto fc = make_field_config(cfg, 10);
    CHECK(fc.variant == field::Variant::QuantumDensity);
    CHECK(fc.density_encoder == field::DensityEncoder::Positional);
    CHECK(fc.q_density.layers == 2);
    CHECK(fc.q_density.n_qubits == 4);
    CHECK(fc.n_train_images == 10);

    cfg.hash_preset = "C3";
    cfg.encoding_kind = "hash";
    auto fc2 = make_field_config(cfg, 5);
    CHECK(fc2.hash.levels == 12);
    CHECK(fc2.hash.table_size_log2 == 17);

    cfg.hash_preset = "C99";
    CHECK_THROWS_AS(make_field_config(cfg, 5), ConfigError);

    auto pc = make_proposal_config(RunConfig{});
    CHECK(pc.stages == std::vector<int>{256, 96});
    CHECK(pc.update_every == 5);
}

TEST_CASE("config: reference text covers every key") {
    auto ref = config_reference();
    for (const char* key : {"path", "variant", "color_spec", "stages", "total_iters",
                            "rays_per_batch", "anneal_slope", "dir", "table_compat"})
        CHECK(ref.find(key) != std::string::npos);
}
