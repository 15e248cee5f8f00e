#include "qnerf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace qnerf::config {

namespace {

struct Value {
    enum class Type { Int, Float, Bool, String, IntArray } type;
    int64_t i = 0;
    double f = 0;
    bool b = false;
    std::string s;
    std::vector<int64_t> arr;
};

struct Binder {
    const char* section;
    const char* key;
    Value::Type type;
    std::function<void(RunConfig&, const Value&)> set;
    std::function<Value(const RunConfig&)> get;
    const char* doc;
};

Value v_int(int64_t x) { return {Value::Type::Int, x, 0, false, {}, {}}; }
Value v_float(double x) { return {Value::Type::Float, 0, x, false, {}, {}}; }
Value v_bool(bool x) { return {Value::Type::Bool, 0, 0, x, {}, {}}; }
Value v_str(std::string x) { return {Value::Type::String, 0, 0, false, std::move(x), {}}; }
Value v_arr(std::vector<int64_t> x) { return {Value::Type::IntArray, 0, 0, false, {}, std::move(x)}; }

template <typename T>
Binder bind_int(const char* sec, const char* key, T RunConfig::* member, const char* doc) {
    return {sec, key, Value::Type::Int,
            [member](RunConfig& c, const Value& v) { c.*member = T(v.i); },
            [member](const RunConfig& c) { return v_int(int64_t(c.*member)); }, doc};
}

Binder bind_float(const char* sec, const char* key, double RunConfig::* member, const char* doc) {
    return {sec, key, Value::Type::Float,
            [member](RunConfig& c, const Value& v) { c.*member = v.f; },
            [member](const RunConfig& c) { return v_float(c.*member); }, doc};
}

Binder bind_bool(const char* sec, const char* key, bool RunConfig::* member, const char* doc) {
    return {sec, key, Value::Type::Bool,
            [member](RunConfig& c, const Value& v) { c.*member = v.b; },
            [member](const RunConfig& c) { return v_bool(c.*member); }, doc};
}

Binder bind_str(const char* sec, const char* key, std::string RunConfig::* member,
                const char* doc) {
    return {sec, key, Value::Type::String,
            [member](RunConfig& c, const Value& v) { c.*member = v.s; },
            [member](const RunConfig& c) { return v_str(c.*member); }, doc};
}

Binder bind_arr(const char* sec, const char* key, std::vector<int64_t> RunConfig::* member,
                const char* doc) {
    return {sec, key, Value::Type::IntArray,
            [member](RunConfig& c, const Value& v) { c.*member = v.arr; },
            [member](const RunConfig& c) { return v_arr(c.*member); }, doc};
}

const std::vector<Binder>& schema() {
    static const std::vector<Binder> s = {
        bind_str("dataset", "path", &RunConfig::dataset_path, "camera manifest (transforms.json)"),
        bind_int("dataset", "downsample_width", &RunConfig::downsample_width,
                 "target width, 0 keeps source"),
        bind_int("dataset", "downsample_height", &RunConfig::downsample_height,
                 "target height, 0 keeps source"),
        bind_float("dataset", "train_fraction", &RunConfig::train_fraction,
                   "train split fraction"),
        bind_int("dataset", "split_seed", &RunConfig::split_seed, "split permutation seed"),

        bind_str("field", "variant", &RunConfig::variant,
                 "classical | q-color | q-density | q-both"),
        bind_int("field", "geo_features", &RunConfig::geo_features, "geometric feature width"),
        bind_int("field", "appearance_dim", &RunConfig::appearance_dim,
                 "per-image appearance embedding width"),
        bind_int("field", "sh_degree", &RunConfig::sh_degree, "spherical-harmonics bands"),
        bind_arr("field", "density_hidden", &RunConfig::density_hidden,
                 "density MLP hidden widths"),
        bind_arr("field", "color_hidden", &RunConfig::color_hidden, "color MLP hidden widths"),

        bind_str("encoding", "kind", &RunConfig::encoding_kind, "hash | positional"),
        bind_str("encoding", "preset", &RunConfig::hash_preset, "C1..C7 | custom"),
        bind_int("encoding", "levels", &RunConfig::hash_levels, "hash levels (custom)"),
        bind_int("encoding", "features_per_level", &RunConfig::hash_features_per_level,
                 "features per level (custom)"),
        bind_int("encoding", "base_resolution", &RunConfig::hash_base_resolution,
                 "coarsest grid resolution"),
        bind_int("encoding", "max_resolution", &RunConfig::hash_max_resolution,
                 "finest grid resolution"),
        bind_int("encoding", "table_log2", &RunConfig::hash_table_log2,
                 "log2 hash table size (custom)"),
        bind_int("encoding", "pe_bands", &RunConfig::pe_bands, "positional encoding bands"),

        bind_str("qiren", "color_spec", &RunConfig::color_spec, "color stack, e.g. 1L+2S"),
        bind_str("qiren", "density_spec", &RunConfig::density_spec, "density stack, e.g. 2L+2S"),
        bind_int("qiren", "n_qubits", &RunConfig::n_qubits, "qubits per layer"),
        bind_bool("qiren", "table_compat", &RunConfig::table_compat,
                  "published-budget structural profile"),
        bind_bool("qiren", "small_angle_init", &RunConfig::small_angle_init,
                  "init Euler angles in (-0.1, 0.1)"),

        bind_arr("sampling", "stages", &RunConfig::proposal_stages, "proposal samples per stage"),
        bind_int("sampling", "final_samples", &RunConfig::final_samples,
                 "field samples per ray"),
        bind_int("sampling", "update_every", &RunConfig::proposal_update_every,
                 "proposal update cadence"),
        bind_float("sampling", "anneal_slope", &RunConfig::anneal_slope,
                   "proposal weight annealing slope"),
        bind_int("sampling", "anneal_warmup", &RunConfig::anneal_warmup,
                 "annealing warmup iterations"),
        bind_float("sampling", "near", &RunConfig::near, "ray near bound (scene units)"),
        bind_float("sampling", "far", &RunConfig::far, "ray far bound (scene units)"),
        bind_arr("sampling", "proposal_hidden", &RunConfig::proposal_hidden,
                 "proposal MLP hidden width per stage"),
        bind_arr("sampling", "proposal_levels", &RunConfig::proposal_levels,
                 "proposal hash levels per stage"),
        bind_arr("sampling", "proposal_table_log2", &RunConfig::proposal_table_log2,
                 "proposal log2 table size per stage"),
        bind_arr("sampling", "proposal_max_res", &RunConfig::proposal_max_res,
                 "proposal max resolution per stage"),

        bind_int("trainer", "total_iters", &RunConfig::total_iters, "training iterations"),
        bind_int("trainer", "rays_per_batch", &RunConfig::rays_per_batch, "train batch rays"),
        bind_int("trainer", "eval_rays_per_batch", &RunConfig::eval_rays_per_batch,
                 "eval chunk rays"),
        bind_float("trainer", "peak_lr", &RunConfig::peak_lr, "post-warmup learning rate"),
        bind_float("trainer", "final_lr", &RunConfig::final_lr, "learning rate at total_iters"),
        bind_float("trainer", "pre_warmup_lr", &RunConfig::pre_warmup_lr,
                   "ramp start learning rate"),
        bind_int("trainer", "warmup_steps", &RunConfig::warmup_steps, "cosine ramp steps"),
        bind_int("trainer", "seed", &RunConfig::seed, "master RNG seed"),
        bind_float("trainer", "photometric_weight", &RunConfig::photometric_weight,
                   "L2 photometric loss weight"),
        bind_float("trainer", "proposal_weight", &RunConfig::proposal_weight,
                   "interlevel loss weight"),
        bind_float("trainer", "accumulation_weight", &RunConfig::accumulation_weight,
                   "accumulation regularizer weight"),
        bind_int("trainer", "eval_every", &RunConfig::eval_every, "eval cadence (iterations)"),
        bind_int("trainer", "checkpoint_every", &RunConfig::checkpoint_every,
                 "checkpoint cadence (iterations)"),
        bind_bool("trainer", "pose_optimization", &RunConfig::pose_optimization,
                  "optimize train camera poses"),
        bind_float("trainer", "pose_lr_scale", &RunConfig::pose_lr_scale,
                   "pose delta learning-rate scale"),
        bind_int("trainer", "threads", &RunConfig::threads, "thread budget, 0 = library default"),

        bind_str("output", "dir", &RunConfig::output_dir, "artifact directory"),
    };
    return s;
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

Value parse_value(const std::string& raw, int line) {
    const std::string text = trim(raw);
    if (text.empty()) fail(line, "missing value");
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') fail(line, "unterminated string");
        return v_str(text.substr(1, text.size() - 2));
    }
    if (text == "true") return v_bool(true);
    if (text == "false") return v_bool(false);
    if (text.front() == '[') {
        if (text.back() != ']') fail(line, "unterminated array");
        std::vector<int64_t> arr;
        std::string inner = text.substr(1, text.size() - 2);
        std::stringstream ss(inner);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                arr.push_back(std::stoll(item));
            } catch (const std::exception&) {
                fail(line, "bad array element '" + item + "'");
            }
        }
        return v_arr(std::move(arr));
    }
    const bool looks_float = text.find_first_of(".eE") != std::string::npos;
    try {
        if (looks_float) return v_float(std::stod(text));
        return v_int(std::stoll(text));
    } catch (const std::exception&) {
        fail(line, "bad value '" + text + "'");
    }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto& b : schema()) known = known || section == b.section;
            if (!known) fail(line_no, "unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (section.empty()) fail(line_no, "key '" + key + "' outside any section");
        const Binder* binder = nullptr;
        for (const auto& b : schema())
            if (section == b.section && key == b.key) binder = &b;
        if (!binder) fail(line_no, "unknown key '" + section + "." + key + "'");
        Value v = parse_value(line.substr(eq + 1), line_no);
        // Integers are acceptable where floats are expected.
        if (binder->type == Value::Type::Float && v.type == Value::Type::Int) {
            v.f = double(v.i);
            v.type = Value::Type::Float;
        }
        if (v.type != binder->type) fail(line_no, "wrong type for '" + section + "." + key + "'");
        binder->set(cfg, v);
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    std::string section;
    for (const auto& b : schema()) {
        if (section != b.section) {
            if (!section.empty()) os << "\n";
            section = b.section;
            os << "[" << section << "]\n";
        }
        os << b.key << " = ";
        const Value v = b.get(cfg);
        switch (v.type) {
            case Value::Type::Int: os << v.i; break;
            case Value::Type::Float: {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", v.f);
                os << buf;
                break;
            }
            case Value::Type::Bool: os << (v.b ? "true" : "false"); break;
            case Value::Type::String: os << '"' << v.s << '"'; break;
            case Value::Type::IntArray: {
                os << "[";
                for (std::size_t i = 0; i < v.arr.size(); ++i)
                    os << (i ? ", " : "") << v.arr[i];
                os << "]";
                break;
            }
        }
        os << "\n";
    }
    return os.str();
}

std::string config_reference() {
    std::ostringstream os;
    std::string section;
    for (const auto& b : schema()) {
        if (section != b.section) {
            section = b.section;
            os << "[" << section << "]\n";
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %-22s %s\n", b.key, b.doc);
        os << buf;
    }
    return os.str();
}

field::FieldConfig make_field_config(const RunConfig& cfg, int n_train_images) {
    field::FieldConfig fc;
    fc.variant = field::variant_from_string(cfg.variant);
    fc.density_encoder = cfg.encoding_kind == "positional" ? field::DensityEncoder::Positional
                                                           : field::DensityEncoder::Hash;
    if (cfg.encoding_kind != "hash" && cfg.encoding_kind != "positional")
        throw ConfigError("encoding.kind must be hash or positional");
    if (cfg.hash_preset == "custom") {
        fc.hash.name = "custom";
        fc.hash.levels = cfg.hash_levels;
        fc.hash.features_per_level = cfg.hash_features_per_level;
        fc.hash.table_size_log2 = cfg.hash_table_log2;
    } else {
        fc.hash = enc::hash_preset(cfg.hash_preset);
    }
    fc.hash.base_resolution = cfg.hash_base_resolution;
    fc.hash.max_resolution = cfg.hash_max_resolution;
    fc.positional.n_bands = cfg.pe_bands;
    fc.geo_dim = cfg.geo_features;
    fc.sh_degree = cfg.sh_degree;
    fc.appearance_dim = cfg.appearance_dim;
    fc.n_train_images = n_train_images;
    fc.density_mlp.hidden.assign(cfg.density_hidden.begin(), cfg.density_hidden.end());
    fc.color_mlp.hidden.assign(cfg.color_hidden.begin(), cfg.color_hidden.end());
    fc.q_density = make_density_stack_spec(cfg);
    fc.q_color = make_color_stack_spec(cfg);
    return fc;
}

qiren::StackSpec make_color_stack_spec(const RunConfig& cfg) {
    auto spec = qiren::parse_spec(cfg.color_spec);
    spec.n_qubits = cfg.n_qubits;
    spec.table_compat = cfg.table_compat;
    spec.small_angle_init = cfg.small_angle_init;
    return spec;
}

qiren::StackSpec make_density_stack_spec(const RunConfig& cfg) {
    auto spec = qiren::parse_spec(cfg.density_spec);
    spec.n_qubits = cfg.n_qubits;
    spec.small_angle_init = cfg.small_angle_init;
    return spec;
}

sampling::ProposalConfig make_proposal_config(const RunConfig& cfg) {
    sampling::ProposalConfig pc;
    pc.stages.assign(cfg.proposal_stages.begin(), cfg.proposal_stages.end());
    pc.final_samples = cfg.final_samples;
    pc.update_every = cfg.proposal_update_every;
    pc.anneal_slope = cfg.anneal_slope;
    pc.anneal_warmup = cfg.anneal_warmup;
    return pc;
}

}  // namespace qnerf::config
