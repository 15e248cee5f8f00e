#include "qnerf/field.hpp"

#include <cmath>

namespace qnerf::field {

using diff::ParamStore;
using diff::Parameter;
using diff::Tape;
using diff::Tensor;
using diff::Var;

Variant variant_from_string(const std::string& s) {
    if (s == "classical") return Variant::Classical;
    if (s == "q-color") return Variant::QuantumColor;
    if (s == "q-density") return Variant::QuantumDensity;
    if (s == "q-both") return Variant::QuantumBoth;
    throw ConfigError("unknown field variant: " + s);
}

std::string variant_to_string(Variant v) {
    switch (v) {
        case Variant::Classical: return "classical";
        case Variant::QuantumColor: return "q-color";
        case Variant::QuantumDensity: return "q-density";
        case Variant::QuantumBoth: return "q-both";
    }
    return "?";
}

Mlp Mlp::build(ParamStore& store, const std::string& prefix, int in_dim, const MlpSpec& spec,
               int out_dim, Rng& rng) {
    Mlp mlp;
    int d = in_dim;
    auto add_layer = [&](int out, int idx) {
        auto& w = store.create(prefix + ".w" + std::to_string(idx), d, out);
        auto& b = store.create(prefix + ".b" + std::to_string(idx), 1, out);
        const double bound = 1.0 / std::sqrt(double(d));
        for (double& v : w.value.v) v = rng.uniform(-bound, bound);
        for (double& v : b.value.v) v = rng.uniform(-bound, bound);
        mlp.weights.push_back(&w);
        mlp.biases.push_back(&b);
        d = out;
    };
    int idx = 0;
    for (int h : spec.hidden) add_layer(h, idx++);
    add_layer(out_dim, idx);
    return mlp;
}

Var Mlp::forward(Tape& t, Var x) const {
    Var h = x;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        h = diff::add_row(t, diff::matmul(t, h, t.leaf(*weights[i])), t.leaf(*biases[i]));
        if (i + 1 < weights.size()) h = diff::relu(t, h);
    }
    return h;
}

int64_t Mlp::count_params() const {
    int64_t n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i)
        n += weights[i]->value.size() + biases[i]->value.size();
    return n;
}

Field Field::build(ParamStore& store, const FieldConfig& cfg, Rng& rng) {
    Field f;
    f.cfg_ = cfg;

    const bool quantum_density =
        cfg.variant == Variant::QuantumDensity || cfg.variant == Variant::QuantumBoth;
    const bool quantum_color =
        cfg.variant == Variant::QuantumColor || cfg.variant == Variant::QuantumBoth;
    // Quantum density heads are compared against positional encoding.
    if (quantum_density && cfg.density_encoder != DensityEncoder::Positional)
        throw ConfigError("q-density and q-both require encoding.kind = positional");

    int density_in = 0;
    if (cfg.density_encoder == DensityEncoder::Hash) {
        auto& table = store.create("field.density.hash_table", cfg.hash.table_rows(),
                                   cfg.hash.features_per_level);
        for (double& v : table.value.v) v = rng.uniform(-1e-4, 1e-4);
        f.hash_ = std::make_shared<enc::HashEncoding>(cfg.hash, table);
        density_in = cfg.hash.out_dim();
    } else {
        density_in = cfg.positional.out_dim();
    }

    if (quantum_density) {
        f.q_density_ = qiren::QirenStack::build(store, "field.density.qiren", cfg.q_density,
                                                density_in, 1 + cfg.geo_dim, rng);
    } else {
        f.density_mlp_ = Mlp::build(store, "field.density.mlp", density_in, cfg.density_mlp,
                                    1 + cfg.geo_dim, rng);
    }

    const int sh_dim = cfg.sh_degree * cfg.sh_degree;
    if (quantum_color) {
        f.q_color_ = qiren::QirenStack::build(store, "field.color.qiren", cfg.q_color,
                                              cfg.geo_dim + 3, 3, rng);
    } else {
        f.color_mlp_ = Mlp::build(store, "field.color.mlp",
                                  cfg.geo_dim + sh_dim + cfg.appearance_dim, cfg.color_mlp, 3,
                                  rng);
    }

    if (!quantum_color) {
        auto& app = store.create("field.appearance", cfg.n_train_images, cfg.appearance_dim);
        for (double& v : app.value.v) v = 0.01 * rng.normal();
        f.appearance_ = &app;
    }
    return f;
}

Field::DensityOut Field::density(Tape& t, Var positions) const {
    Var contracted = enc::contract_node(t, positions);
    Var feats;
    if (cfg_.density_encoder == DensityEncoder::Hash) {
        feats = hash_->encode(t, enc::grid01_node(t, contracted));
    } else {
        feats = enc::positional_node(t, contracted, cfg_.positional);
    }
    const bool quantum =
        cfg_.variant == Variant::QuantumDensity || cfg_.variant == Variant::QuantumBoth;
    Var raw = quantum ? q_density_.forward(t, feats) : density_mlp_.forward(t, feats);
    DensityOut out;
    out.sigma = diff::softplus(t, diff::slice_cols(t, raw, 0, 1));
    out.geo = diff::slice_cols(t, raw, 1, 1 + cfg_.geo_dim);
    return out;
}

Var Field::color(Tape& t, Var geo, Var dirs, Var appearance) const {
    const bool quantum =
        cfg_.variant == Variant::QuantumColor || cfg_.variant == Variant::QuantumBoth;
    if (quantum) {
        Var input = diff::concat_cols(t, {geo, dirs});
        return diff::sigmoid(t, q_color_.forward(t, input));
    }
    Var sh = enc::sh_node(t, dirs, cfg_.sh_degree);
    Var input = diff::concat_cols(t, {geo, sh, appearance});
    return diff::sigmoid(t, color_mlp_.forward(t, input));
}

Field::Outputs Field::forward(Tape& t, Var positions, Var dirs, Var appearance) const {
    DensityOut d = density(t, positions);
    Outputs out;
    out.sigma = d.sigma;
    out.geo = d.geo;
    out.rgb = color(t, d.geo, dirs, appearance);
    return out;
}

Var Field::appearance_rows(Tape& t, const std::vector<int64_t>& image_ids) const {
    if (!appearance_) throw GraphError("this field variant has no appearance embeddings");
    return diff::gather_rows(t, t.leaf(*appearance_), image_ids);
}

Var Field::mean_appearance(Tape& t, int64_t n_rows) const {
    if (!appearance_) throw GraphError("this field variant has no appearance embeddings");
    // Mean of the trained per-image embeddings, constant w.r.t. the tape.
    const Tensor& a = appearance_->value;
    Tensor mean(1, a.cols, 0.0);
    for (int64_t r = 0; r < a.rows; ++r)
        for (int64_t c = 0; c < a.cols; ++c) mean.at(0, c) += a.at(r, c) / double(a.rows);
    Tensor rows(n_rows, a.cols);
    for (int64_t r = 0; r < n_rows; ++r)
        for (int64_t c = 0; c < a.cols; ++c) rows.at(r, c) = mean.at(0, c);
    return t.constant(std::move(rows));
}

int64_t Field::count_density_params() const {
    const bool quantum =
        cfg_.variant == Variant::QuantumDensity || cfg_.variant == Variant::QuantumBoth;
    return quantum ? q_density_.count_params() : density_mlp_.count_params();
}

int64_t Field::count_color_params() const {
    const bool quantum =
        cfg_.variant == Variant::QuantumColor || cfg_.variant == Variant::QuantumBoth;
    return quantum ? q_color_.count_params() : color_mlp_.count_params();
}

ProposalNet ProposalNet::build(ParamStore& store, const std::string& prefix,
                               const enc::HashEncodingConfig& hash_cfg, int hidden, Rng& rng) {
    ProposalNet net;
    auto& table =
        store.create(prefix + ".hash_table", hash_cfg.table_rows(), hash_cfg.features_per_level);
    for (double& v : table.value.v) v = rng.uniform(-1e-4, 1e-4);
    net.hash_ = std::make_shared<enc::HashEncoding>(hash_cfg, table);
    MlpSpec spec;
    spec.hidden = {hidden};
    net.mlp_ = Mlp::build(store, prefix + ".mlp", hash_cfg.out_dim(), spec, 1, rng);
    return net;
}

Var ProposalNet::density(Tape& t, Var positions) const {
    Var contracted = enc::contract_node(t, positions);
    Var feats = hash_->encode(t, enc::grid01_node(t, contracted));
    return diff::softplus(t, mlp_.forward(t, feats));
}

}  // namespace qnerf::field
