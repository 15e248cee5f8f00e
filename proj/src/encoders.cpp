#include "qnerf/encoders.hpp"

#include <cmath>
#include <complex>

namespace qnerf::enc {

using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

inline void check_finite(const Vec3& x) {
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(x[2]))
        throw InvalidCoordinate("non-finite coordinate");
}

}  // namespace

Vec3 contract(const Vec3& x) {
    check_finite(x);
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    if (r <= 1.0) return x;
    const double a = (2.0 - 1.0 / r) / r;
    return {a * x[0], a * x[1], a * x[2]};
}

Vec3 contract_to_grid01(const Vec3& x) {
    Vec3 c = contract(x);
    return {(c[0] + 2.0) / 4.0, (c[1] + 2.0) / 4.0, (c[2] + 2.0) / 4.0};
}

std::vector<double> positional_encode(const Vec3& x, const PositionalEncodingConfig& cfg) {
    check_finite(x);
    std::vector<double> out;
    out.reserve(std::size_t(cfg.out_dim()));
    for (int axis = 0; axis < 3; ++axis) {
        double freq = M_PI;
        for (int k = 0; k < cfg.n_bands; ++k) {
            out.push_back(std::sin(freq * x[std::size_t(axis)]));
            out.push_back(std::cos(freq * x[std::size_t(axis)]));
            freq *= 2.0;
        }
    }
    return out;
}

double HashEncodingConfig::level_scale() const {
    if (levels <= 1) return 1.0;
    return std::exp((std::log(double(max_resolution)) - std::log(double(base_resolution))) /
                    double(levels - 1));
}

int HashEncodingConfig::resolution(int level) const {
    const double r = double(base_resolution) * std::pow(level_scale(), double(level));
    return int(std::floor(r + 0.5));
}

HashEncodingConfig hash_preset(const std::string& name) {
    for (const auto& p : hash_presets())
        if (p.name == name) return p;
    throw ConfigError("unknown hash encoding preset: " + name);
}

std::vector<HashEncodingConfig> hash_presets() {
    auto mk = [](const char* name, int levels, int feat, int h, int meta) {
        HashEncodingConfig c;
        c.name = name;
        c.levels = levels;
        c.features_per_level = feat;
        c.table_size_log2 = h;
        c.table_entries_meta = meta;
        c.mlp_hidden = 16;
        return c;
    };
    return {
        mk("C1", 16, 2, 19, 2048), mk("C2", 16, 2, 17, 2048), mk("C3", 12, 2, 17, 2048),
        mk("C4", 12, 1, 17, 2048), mk("C5", 12, 1, 15, 1024), mk("C6", 8, 1, 15, 1024),
        mk("C7", 8, 1, 13, 1024),
    };
}

namespace {

// Instant-NGP style spatial hash of integer grid coordinates.
inline uint64_t spatial_hash(int64_t x, int64_t y, int64_t z, int log2_size) {
    const uint64_t h =
        uint64_t(x) ^ (uint64_t(y) * 2654435761ULL) ^ (uint64_t(z) * 805459861ULL);
    return h & ((uint64_t(1) << log2_size) - 1);
}

struct CellRef {
    // 8 corner rows into the table and their trilinear weights, plus the
    // per-axis weight derivatives (the grid resolution factor included).
    std::array<int64_t, 8> row;
    std::array<double, 8> w;
    std::array<std::array<double, 3>, 8> dw;  // d w / d p01
};

std::vector<LevelGeom> level_geometry(const HashEncodingConfig& cfg) {
    std::vector<LevelGeom> out;
    out.reserve(std::size_t(cfg.levels));
    for (int level = 0; level < cfg.levels; ++level) {
        LevelGeom g;
        g.res = double(cfg.resolution(level));
        g.max_p = std::nextafter(g.res, 0.0);
        g.table_offset = int64_t(level) << cfg.table_size_log2;
        g.log2_size = cfg.table_size_log2;
        out.push_back(g);
    }
    return out;
}

inline CellRef locate(const Vec3& p01, const LevelGeom& geom) {
    const double res = geom.res;
    const int64_t level_off = geom.table_offset;

    double f[3];
    int64_t c0[3];
    for (int a = 0; a < 3; ++a) {
        double p = p01[std::size_t(a)] * res;
        // Clamp into the valid cell range so corners stay on the grid.
        if (p < 0.0) p = 0.0;
        if (p > geom.max_p) p = geom.max_p;
        c0[a] = int64_t(p);
        if (c0[a] > int64_t(res) - 1) c0[a] = int64_t(res) - 1;
        f[a] = p - double(c0[a]);
    }

    CellRef cell;
    for (int corner = 0; corner < 8; ++corner) {
        const int bx = corner & 1, by = (corner >> 1) & 1, bz = (corner >> 2) & 1;
        const int64_t gx = c0[0] + bx, gy = c0[1] + by, gz = c0[2] + bz;
        cell.row[std::size_t(corner)] =
            level_off + int64_t(spatial_hash(gx, gy, gz, geom.log2_size));
        const double wx = bx ? f[0] : 1.0 - f[0];
        const double wy = by ? f[1] : 1.0 - f[1];
        const double wz = bz ? f[2] : 1.0 - f[2];
        cell.w[std::size_t(corner)] = wx * wy * wz;
        const double sx = bx ? 1.0 : -1.0, sy = by ? 1.0 : -1.0, sz = bz ? 1.0 : -1.0;
        cell.dw[std::size_t(corner)] = {sx * wy * wz * res, wx * sy * wz * res,
                                        wx * wy * sz * res};
    }
    return cell;
}

}  // namespace

HashEncoding::HashEncoding(HashEncodingConfig cfg, diff::Parameter& table)
    : cfg_(std::move(cfg)), table_(&table), levels_(level_geometry(cfg_)) {
    if (table.value.rows != cfg_.table_rows() || table.value.cols != cfg_.features_per_level)
        throw DimError("hash table parameter shape does not match the encoding config");
}

std::vector<double> HashEncoding::encode_point(const Vec3& p01) const {
    std::vector<double> out(std::size_t(cfg_.out_dim()), 0.0);
    const Tensor& tab = table_->value;
    const int m = cfg_.features_per_level;
    for (int level = 0; level < cfg_.levels; ++level) {
        const CellRef cell = locate(p01, levels_[std::size_t(level)]);
        for (int corner = 0; corner < 8; ++corner) {
            const double w = cell.w[std::size_t(corner)];
            const int64_t row = cell.row[std::size_t(corner)];
            for (int fidx = 0; fidx < m; ++fidx)
                out[std::size_t(level * m + fidx)] += w * tab.at(row, fidx);
        }
    }
    return out;
}

Var HashEncoding::encode(Tape& t, Var points01) const {
    const int m = cfg_.features_per_level;
    const int levels = cfg_.levels;
    const std::vector<LevelGeom> geom = levels_;
    diff::Parameter* table = table_;

    Var table_leaf = t.leaf(*table);
    const Tensor& pts = t.value(points01);
    if (pts.cols != 3) throw DimError("hash encode expects [N,3] points");
    const int64_t n = pts.rows;

    Tensor out(n, int64_t(levels * m));
    // Cells are recomputed in backward; cheaper than caching 8 rows per point.
    const Tensor& tab = table->value;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= 256)
#endif
    for (int64_t i = 0; i < n; ++i) {
        const Vec3 p{pts.at(i, 0), pts.at(i, 1), pts.at(i, 2)};
        for (int level = 0; level < levels; ++level) {
            const CellRef cell = locate(p, geom[std::size_t(level)]);
            for (int corner = 0; corner < 8; ++corner) {
                const double w = cell.w[std::size_t(corner)];
                const int64_t row = cell.row[std::size_t(corner)];
                for (int fidx = 0; fidx < m; ++fidx)
                    out.at(i, level * m + fidx) += w * tab.at(row, fidx);
            }
        }
    }

    const bool ng = t.needs_grad(table_leaf) || t.needs_grad(points01);
    return t.node(std::move(out), ng, [points01, table_leaf, geom, levels, m](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& pts2 = tp.value(points01);
        const Tensor& tab2 = tp.value(table_leaf);
        const bool want_table = tp.needs_grad(table_leaf);
        const bool want_pts = tp.needs_grad(points01);
        Tensor* dtab = want_table ? &tp.grad(table_leaf) : nullptr;
        Tensor* dpts = want_pts ? &tp.grad(points01) : nullptr;
        // Serial scatter: corner rows collide across points by design.
        for (int64_t i = 0; i < pts2.rows; ++i) {
            const Vec3 p{pts2.at(i, 0), pts2.at(i, 1), pts2.at(i, 2)};
            for (int level = 0; level < levels; ++level) {
                const CellRef cell = locate(p, geom[std::size_t(level)]);
                for (int corner = 0; corner < 8; ++corner) {
                    const int64_t row = cell.row[std::size_t(corner)];
                    for (int fidx = 0; fidx < m; ++fidx) {
                        const double go = g.at(i, level * m + fidx);
                        if (go == 0.0) continue;
                        if (want_table)
                            dtab->at(row, fidx) += go * cell.w[std::size_t(corner)];
                        if (want_pts) {
                            const double tv = tab2.at(row, fidx);
                            for (int a = 0; a < 3; ++a)
                                dpts->at(i, a) +=
                                    go * tv * cell.dw[std::size_t(corner)][std::size_t(a)];
                        }
                    }
                }
            }
        }
    });
}

namespace {

// Real SH basis templated on the scalar so the tape node can take exact
// derivatives by complex step.
template <typename T>
void sh_basis(T x, T y, T z, int degree, T* out) {
    out[0] = T(0.28209479177387814);
    if (degree <= 1) return;
    out[1] = T(0.4886025119029199) * y;
    out[2] = T(0.4886025119029199) * z;
    out[3] = T(0.4886025119029199) * x;
    if (degree <= 2) return;
    const T xx = x * x, yy = y * y, zz = z * z;
    out[4] = T(1.0925484305920792) * x * y;
    out[5] = T(1.0925484305920792) * y * z;
    out[6] = T(0.31539156525252005) * (T(3.0) * zz - T(1.0));
    out[7] = T(1.0925484305920792) * x * z;
    out[8] = T(0.5462742152960396) * (xx - yy);
    if (degree <= 3) return;
    out[9] = T(0.5900435899266435) * y * (T(3.0) * xx - yy);
    out[10] = T(2.890611442640554) * x * y * z;
    out[11] = T(0.4570457994644658) * y * (T(5.0) * zz - T(1.0));
    out[12] = T(0.3731763325901154) * z * (T(5.0) * zz - T(3.0));
    out[13] = T(0.4570457994644658) * x * (T(5.0) * zz - T(1.0));
    out[14] = T(1.445305721320277) * z * (xx - yy);
    out[15] = T(0.5900435899266435) * x * (xx - T(3.0) * yy);
}

}  // namespace

std::vector<double> sh_encode(const Vec3& d, int degree) {
    if (degree < 1 || degree > 4) throw DimError("sh degree must be in 1..4");
    const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (n < 1e-6) throw InvalidDirection("zero-length direction");
    std::vector<double> out(std::size_t(degree * degree));
    sh_basis(d[0], d[1], d[2], degree, out.data());
    return out;
}

Var contract_node(Tape& t, Var x) {
    const Tensor& xv = t.value(x);
    if (xv.cols != 3) throw DimError("contract expects [N,3]");
    Tensor out(xv.rows, 3);
    for (int64_t i = 0; i < xv.rows; ++i) {
        Vec3 c = contract({xv.at(i, 0), xv.at(i, 1), xv.at(i, 2)});
        out.at(i, 0) = c[0];
        out.at(i, 1) = c[1];
        out.at(i, 2) = c[2];
    }
    return t.node(std::move(out), t.needs_grad(x), [x](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.value(x);
        Tensor& dx = tp.grad(x);
        for (int64_t i = 0; i < xv2.rows; ++i) {
            const Vec3 p{xv2.at(i, 0), xv2.at(i, 1), xv2.at(i, 2)};
            const double r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            if (r2 <= 1.0) {
                for (int a = 0; a < 3; ++a) dx.at(i, a) += g.at(i, a);
                continue;
            }
            // f(p) = a(r) p with a = 2/r - 1/r^2; J = a I + (a'/r) p p^T.
            const double r = std::sqrt(r2);
            const double a = 2.0 / r - 1.0 / r2;
            const double da_over_r = (-2.0 / r2 + 2.0 / (r2 * r)) / r;
            for (int col = 0; col < 3; ++col) {
                double acc = 0.0;
                for (int row = 0; row < 3; ++row) {
                    const double j = a * (row == col ? 1.0 : 0.0) +
                                     da_over_r * p[std::size_t(row)] * p[std::size_t(col)];
                    acc += g.at(i, row) * j;
                }
                dx.at(i, col) += acc;
            }
        }
    });
}

Var grid01_node(Tape& t, Var contracted) {
    return diff::add_scalar(t, diff::scale(t, contracted, 0.25), 0.5);
}

Var positional_node(Tape& t, Var x, const PositionalEncodingConfig& cfg) {
    const Tensor& xv = t.value(x);
    if (xv.cols != 3) throw DimError("positional encode expects [N,3]");
    const int bands = cfg.n_bands;
    Tensor out(xv.rows, int64_t(6 * bands));
    for (int64_t i = 0; i < xv.rows; ++i) {
        int64_t j = 0;
        for (int axis = 0; axis < 3; ++axis) {
            double freq = M_PI;
            const double v = xv.at(i, axis);
            for (int k = 0; k < bands; ++k) {
                out.at(i, j++) = std::sin(freq * v);
                out.at(i, j++) = std::cos(freq * v);
                freq *= 2.0;
            }
        }
    }
    return t.node(std::move(out), t.needs_grad(x), [x, bands](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.value(x);
        Tensor& dx = tp.grad(x);
        for (int64_t i = 0; i < xv2.rows; ++i) {
            int64_t j = 0;
            for (int axis = 0; axis < 3; ++axis) {
                double freq = M_PI;
                const double v = xv2.at(i, axis);
                double acc = 0.0;
                for (int k = 0; k < bands; ++k) {
                    acc += g.at(i, j++) * freq * std::cos(freq * v);
                    acc -= g.at(i, j++) * freq * std::sin(freq * v);
                    freq *= 2.0;
                }
                dx.at(i, axis) += acc;
            }
        }
    });
}

Var sh_node(Tape& t, Var dirs, int degree) {
    const Tensor& dv = t.value(dirs);
    if (dv.cols != 3) throw DimError("sh encode expects [N,3]");
    if (degree < 1 || degree > 4) throw DimError("sh degree must be in 1..4");
    const int dim = degree * degree;
    Tensor out(dv.rows, dim);
    for (int64_t i = 0; i < dv.rows; ++i)
        sh_basis(dv.at(i, 0), dv.at(i, 1), dv.at(i, 2), degree, &out.v[std::size_t(i * dim)]);
    return t.node(std::move(out), t.needs_grad(dirs), [dirs, degree, dim](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& dv2 = tp.value(dirs);
        Tensor& dd = tp.grad(dirs);
        using C = std::complex<double>;
        const double h = 1e-20;  // complex step: exact to machine precision
        std::vector<C> basis(std::size_t(dim), C(0, 0));
        for (int64_t i = 0; i < dv2.rows; ++i) {
            C p[3] = {C(dv2.at(i, 0), 0), C(dv2.at(i, 1), 0), C(dv2.at(i, 2), 0)};
            for (int a = 0; a < 3; ++a) {
                p[a] += C(0, h);
                sh_basis(p[0], p[1], p[2], degree, basis.data());
                p[a] -= C(0, h);
                double acc = 0.0;
                for (int j = 0; j < dim; ++j)
                    acc += g.at(i, j) * (basis[std::size_t(j)].imag() / h);
                dd.at(i, a) += acc;
            }
        }
    });
}

}  // namespace qnerf::enc
