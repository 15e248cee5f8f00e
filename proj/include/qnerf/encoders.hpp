#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qnerf/diff.hpp"

namespace qnerf::enc {

using Vec3 = std::array<double, 3>;

// Piecewise scene contraction: identity inside the unit ball, otherwise
// (2 - 1/|x|) x/|x|, mapping all of space into the radius-2 ball.
Vec3 contract(const Vec3& x);

// Affine rescale of the radius-2 contraction codomain to [0,1]^3 grid space.
Vec3 contract_to_grid01(const Vec3& x);

struct PositionalEncodingConfig {
    int n_bands = 10;
    int out_dim() const { return 6 * n_bands; }
};

// Layout: per axis, per band k, the adjacent pair (sin(2^k pi x), cos(2^k pi x)).
std::vector<double> positional_encode(const Vec3& x, const PositionalEncodingConfig& cfg);

struct HashEncodingConfig {
    std::string name = "custom";
    int levels = 8;
    int features_per_level = 1;
    int base_resolution = 16;
    int max_resolution = 2048;
    int table_size_log2 = 13;
    // Metadata carried from the published configuration table: its raw size
    // column and the MLP hidden width the preset was benchmarked with.
    // 2^table_size_log2 is authoritative for the per-level table length.
    int table_entries_meta = 1024;
    int mlp_hidden = 16;

    int out_dim() const { return levels * features_per_level; }
    int64_t table_rows() const { return int64_t(levels) << table_size_log2; }
    int64_t table_param_count() const { return table_rows() * features_per_level; }
    double level_scale() const;
    int resolution(int level) const;
};

// Named presets C1..C7 mirroring the published configuration table.
HashEncodingConfig hash_preset(const std::string& name);
std::vector<HashEncodingConfig> hash_presets();

// Precomputed per-level grid constants.
struct LevelGeom {
    double res;
    double max_p;  // largest in-range grid coordinate
    int64_t table_offset;
    int log2_size;
};

// Multiresolution hash grid with trainable per-level tables stored as one
// [levels * 2^H, features_per_level] parameter.
class HashEncoding {
public:
    HashEncoding(HashEncodingConfig cfg, diff::Parameter& table);

    const HashEncodingConfig& config() const { return cfg_; }
    diff::Parameter& table() { return *table_; }

    // points01 in [0,1]^3, one row per point; output [N, levels * m].
    diff::Var encode(diff::Tape& t, diff::Var points01) const;

    // Value-level single-point path for tests and inspection.
    std::vector<double> encode_point(const Vec3& p01) const;

private:
    HashEncodingConfig cfg_;
    diff::Parameter* table_;
    std::vector<LevelGeom> levels_;
};

struct ShDirectionEncoding {
    int degree = 4;  // bands l = 0..degree-1
    int out_dim() const { return degree * degree; }
};

// Real spherical harmonics basis, band-major (l ascending, m = -l..l).
// Callers pass unit directions; a zero-length direction is rejected.
std::vector<double> sh_encode(const Vec3& d, int degree);

// ---- tape nodes -----------------------------------------------------------

// x [N,3] -> contracted [N,3]
diff::Var contract_node(diff::Tape& t, diff::Var x);
// contracted [N,3] -> grid coords [N,3] in [0,1]^3
diff::Var grid01_node(diff::Tape& t, diff::Var contracted);
// x [N,3] -> [N, 6*bands]
diff::Var positional_node(diff::Tape& t, diff::Var x, const PositionalEncodingConfig& cfg);
// unit dirs [N,3] -> [N, degree^2]
diff::Var sh_node(diff::Tape& t, diff::Var dirs, int degree);

}  // namespace qnerf::enc
