#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qnerf/diff.hpp"
#include "qnerf/encoders.hpp"
#include "qnerf/qiren.hpp"

namespace qnerf::field {

enum class Variant { Classical, QuantumColor, QuantumDensity, QuantumBoth };

Variant variant_from_string(const std::string& s);  // classical | q-color | q-density | q-both
std::string variant_to_string(Variant v);

enum class DensityEncoder { Hash, Positional };

struct MlpSpec {
    std::vector<int> hidden{64};
};

struct FieldConfig {
    Variant variant = Variant::Classical;
    // Quantum-density comparisons pair with positional encoding; the classical
    // and quantum-color variants default to the hash grid.
    DensityEncoder density_encoder = DensityEncoder::Hash;
    enc::HashEncodingConfig hash = enc::hash_preset("C7");
    enc::PositionalEncodingConfig positional;
    int geo_dim = 15;
    int sh_degree = 4;
    int appearance_dim = 32;
    int n_train_images = 1;
    MlpSpec density_mlp{{64}};
    MlpSpec color_mlp{{64}};
    qiren::StackSpec q_density;
    qiren::StackSpec q_color;
};

// Small fully connected block: ReLU hidden layers, affine output.
struct Mlp {
    std::vector<diff::Parameter*> weights;
    std::vector<diff::Parameter*> biases;

    static Mlp build(diff::ParamStore& store, const std::string& prefix, int in_dim,
                     const MlpSpec& spec, int out_dim, Rng& rng);
    diff::Var forward(diff::Tape& t, diff::Var x) const;
    int64_t count_params() const;
};

// The radiance field: (x, d, a) -> (sigma, c) with shared geometric features.
class Field {
public:
    static Field build(diff::ParamStore& store, const FieldConfig& cfg, Rng& rng);

    struct DensityOut {
        diff::Var sigma;  // [N,1], softplus
        diff::Var geo;    // [N,geo_dim]
    };

    // positions are raw world coordinates [N,3]; contraction happens inside.
    DensityOut density(diff::Tape& t, diff::Var positions) const;

    // geo [N,geo], unit dirs [N,3], appearance [N,app]; sigmoid RGB output.
    diff::Var color(diff::Tape& t, diff::Var geo, diff::Var dirs, diff::Var appearance) const;

    struct Outputs {
        diff::Var sigma;
        diff::Var rgb;
        diff::Var geo;
    };
    Outputs forward(diff::Tape& t, diff::Var positions, diff::Var dirs,
                    diff::Var appearance) const;

    // Per-sample appearance rows for training (by image id) and evaluation
    // (mean of the trained embeddings).
    diff::Var appearance_rows(diff::Tape& t, const std::vector<int64_t>& image_ids) const;
    diff::Var mean_appearance(diff::Tape& t, int64_t n_rows) const;

    const FieldConfig& config() const { return cfg_; }
    // Quantum color heads consume (h, d) only; no appearance table exists then.
    bool has_appearance() const { return appearance_ != nullptr; }
    int64_t count_density_params() const;
    int64_t count_color_params() const;

private:
    FieldConfig cfg_;
    std::shared_ptr<enc::HashEncoding> hash_;
    Mlp density_mlp_;
    Mlp color_mlp_;
    qiren::QirenStack q_density_;
    qiren::QirenStack q_color_;
    diff::Parameter* appearance_ = nullptr;
};

// Lightweight density-only network used by the proposal sampler stages.
class ProposalNet {
public:
    static ProposalNet build(diff::ParamStore& store, const std::string& prefix,
                             const enc::HashEncodingConfig& hash_cfg, int hidden, Rng& rng);
    diff::Var density(diff::Tape& t, diff::Var positions) const;  // [N,1]

private:
    std::shared_ptr<enc::HashEncoding> hash_;
    Mlp mlp_;
};

}  // namespace qnerf::field
