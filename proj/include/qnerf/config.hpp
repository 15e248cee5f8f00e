#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qnerf/common.hpp"
#include "qnerf/encoders.hpp"
#include "qnerf/field.hpp"
#include "qnerf/qiren.hpp"
#include "qnerf/sampling.hpp"

namespace qnerf::config {

// Complete declarative run description. Defaults mirror the reference
// training protocol; the schema rejects unknown keys with the line number.
struct RunConfig {
    // [dataset]
    std::string dataset_path;
    int downsample_width = 0;  // 0 keeps the source size
    int downsample_height = 0;
    double train_fraction = 0.9;
    uint64_t split_seed = 0;

    // [field]
    std::string variant = "classical";
    int geo_features = 15;
    int appearance_dim = 32;
    int sh_degree = 4;
    std::vector<int64_t> density_hidden{64};
    std::vector<int64_t> color_hidden{64};

    // [encoding]
    std::string encoding_kind = "hash";  // hash | positional
    std::string hash_preset = "C7";      // C1..C7 | custom
    int hash_levels = 8;
    int hash_features_per_level = 1;
    int hash_base_resolution = 16;
    int hash_max_resolution = 2048;
    int hash_table_log2 = 13;
    int pe_bands = 10;

    // [qiren]
    std::string color_spec = "1L+2S";
    std::string density_spec = "1L+2S";
    int n_qubits = 8;
    bool table_compat = false;
    bool small_angle_init = false;

    // [sampling]
    std::vector<int64_t> proposal_stages{256, 96};
    int final_samples = 48;
    int proposal_update_every = 5;
    double anneal_slope = 10.0;
    int64_t anneal_warmup = 1000;
    double near = 0.05;
    double far = 10.0;
    std::vector<int64_t> proposal_hidden{16, 16};       // per stage
    std::vector<int64_t> proposal_levels{5, 5};         // per stage
    std::vector<int64_t> proposal_table_log2{17, 17};   // per stage
    std::vector<int64_t> proposal_max_res{128, 256};    // per stage

    // [trainer]
    int64_t total_iters = 30000;
    int rays_per_batch = 128;
    int eval_rays_per_batch = 64;
    double peak_lr = 1e-2;
    double final_lr = 1e-4;
    double pre_warmup_lr = 1e-8;
    int64_t warmup_steps = 0;
    uint64_t seed = 42;
    double photometric_weight = 1.0;
    double proposal_weight = 1.0;
    double accumulation_weight = 1e-3;
    int64_t eval_every = 1000;
    int64_t checkpoint_every = 5000;
    bool pose_optimization = true;
    double pose_lr_scale = 0.06;
    int threads = 0;

    // [output]
    std::string output_dir = "runs/out";
};

// Parses the TOML-style file; throws ConfigError with "line N:" context for
// syntax problems, unknown keys, or type mismatches.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Canonical serialization; parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& cfg);

// Schema-derived documentation for --help and the README.
std::string config_reference();

// Assembled module configs.
field::FieldConfig make_field_config(const RunConfig& cfg, int n_train_images);
qiren::StackSpec make_color_stack_spec(const RunConfig& cfg);
qiren::StackSpec make_density_stack_spec(const RunConfig& cfg);
sampling::ProposalConfig make_proposal_config(const RunConfig& cfg);

}  // namespace qnerf::config
