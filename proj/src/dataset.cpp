#include "qnerf/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qnerf::data {

using diff::Tape;
using diff::Tensor;
using diff::Var;

void CameraModel::validate() const {
    if (!(fx > 0) || !(fy > 0) || !(cx > 0) || !(cy > 0))
        throw DatasetError("camera intrinsics must be positive");
    if (width <= 0 || height <= 0) throw DatasetError("camera size must be positive");
    // R^T R == I and det R == +1 within 1e-6.
    double rtr[9];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int k = 0; k < 3; ++k)
                acc += cam_to_world[std::size_t(k * 4 + i)] * cam_to_world[std::size_t(k * 4 + j)];
            rtr[i * 3 + j] = acc;
        }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::abs(rtr[i * 3 + j] - (i == j ? 1.0 : 0.0)) > 1e-6)
                throw PoseError("rotation is not orthonormal");
    const auto& m = cam_to_world;
    const double det = m[0] * (m[5] * m[10] - m[6] * m[9]) -
                       m[1] * (m[4] * m[10] - m[6] * m[8]) +
                       m[2] * (m[4] * m[9] - m[5] * m[8]);
    if (std::abs(det - 1.0) > 1e-6) throw PoseError("rotation determinant must be +1");
}

CameraModel CameraModel::rescaled(int new_width, int new_height) const {
    CameraModel out = *this;
    const double sx = double(new_width) / width;
    const double sy = double(new_height) / height;
    out.fx = fx * sx;
    out.fy = fy * sy;
    out.cx = cx * sx;
    out.cy = cy * sy;
    out.width = new_width;
    out.height = new_height;
    return out;
}

CameraModel apply_pose_delta(const CameraModel& cam, const std::array<double, 6>& delta) {
    CameraModel out = cam;
    out.cam_to_world = pose_compose(se3_exp(delta), cam.cam_to_world);
    return out;
}

CameraModel look_at_camera(const Vec3& pos, const Vec3& target, const Vec3& up, double fx,
                           double fy, int width, int height) {
    auto sub = [](const Vec3& a, const Vec3& b) { return Vec3{a[0] - b[0], a[1] - b[1], a[2] - b[2]}; };
    auto cross = [](const Vec3& a, const Vec3& b) {
        return Vec3{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    };
    auto normed = [](const Vec3& a) {
        const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        if (n < 1e-12) throw PoseError("degenerate look-at");
        return Vec3{a[0] / n, a[1] / n, a[2] / n};
    };
    const Vec3 zc = normed(sub(pos, target));  // camera looks along -z
    const Vec3 xc = normed(cross(up, zc));
    const Vec3 yc = cross(zc, xc);

    CameraModel cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    cam.width = width;
    cam.height = height;
    for (int i = 0; i < 3; ++i) {
        cam.cam_to_world[std::size_t(i * 4 + 0)] = xc[std::size_t(i)];
        cam.cam_to_world[std::size_t(i * 4 + 1)] = yc[std::size_t(i)];
        cam.cam_to_world[std::size_t(i * 4 + 2)] = zc[std::size_t(i)];
        cam.cam_to_world[std::size_t(i * 4 + 3)] = pos[std::size_t(i)];
    }
    cam.validate();
    return cam;
}

namespace {

Vec3 pixel_dir_cam(const CameraModel& cam, int px, int py) {
    // OpenGL camera: +x right, +y up, looking along -z.
    const double dx = (double(px) + 0.5 - cam.cx) / cam.fx;
    const double dy = -((double(py) + 0.5 - cam.cy) / cam.fy);
    const double n = std::sqrt(dx * dx + dy * dy + 1.0);
    return {dx / n, dy / n, -1.0 / n};
}

}  // namespace

sampling::Ray generate_ray(const CameraModel& cam, int px, int py, double near, double far) {
    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
        throw IndexError("pixel out of bounds");
    const Vec3 dc = pixel_dir_cam(cam, px, py);
    sampling::Ray ray;
    ray.origin = {cam.cam_to_world[3], cam.cam_to_world[7], cam.cam_to_world[11]};
    ray.dir = pose_apply_dir(cam.cam_to_world, dc);
    ray.near = near;
    ray.far = far;
    return ray;
}

void split_frames(int n_frames, const SplitSpec& spec, std::vector<int>& train,
                  std::vector<int>& eval) {
    if (n_frames <= 0) throw DatasetError("empty dataset");
    const int n_eval = int(std::floor(double(n_frames) * (1.0 - spec.train_fraction)));
    std::vector<int> order(std::size_t(n_frames), 0);
    for (int i = 0; i < n_frames; ++i) order[std::size_t(i)] = i;
    Rng rng(derive_seed(spec.seed, 0x5117));
    for (int i = n_frames - 1; i > 0; --i)
        std::swap(order[std::size_t(i)], order[rng.uniform_index(uint64_t(i) + 1)]);
    eval.assign(order.begin(), order.begin() + n_eval);
    train.assign(order.begin() + n_eval, order.end());
    std::sort(train.begin(), train.end());
    std::sort(eval.begin(), eval.end());
}

std::string Dataset::summary() const {
    std::ostringstream os;
    os << "frames: " << frames.size() << "  (train " << train_indices.size() << ", eval "
       << eval_indices.size() << ")\n";
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        const bool is_eval =
            std::find(eval_indices.begin(), eval_indices.end(), int(i)) != eval_indices.end();
        os << "  [" << i << (is_eval ? " eval " : " train") << "] " << f.file_path << "  "
           << f.camera.width << "x" << f.camera.height << "  fx " << f.camera.fx << "  pos ("
           << f.camera.cam_to_world[3] << ", " << f.camera.cam_to_world[7] << ", "
           << f.camera.cam_to_world[11] << ")\n";
    }
    return os.str();
}

Dataset load_dataset(const std::string& manifest_path, const LoadOptions& opts) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw DatasetError("cannot open camera manifest: " + manifest_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DatasetError(std::string("bad camera manifest: ") + e.what());
    }

    auto intr = [&](const nlohmann::json& node, const char* key, double fallback) {
        return node.contains(key) ? node[key].get<double>() : fallback;
    };
    const double g_fx = intr(j, "fl_x", 0), g_fy = intr(j, "fl_y", 0);
    const double g_cx = intr(j, "cx", 0), g_cy = intr(j, "cy", 0);
    const int g_w = int(intr(j, "w", 0)), g_h = int(intr(j, "h", 0));

    if (!j.contains("frames") || !j["frames"].is_array() || j["frames"].empty())
        throw DatasetError("camera manifest has no frames");

    const fs::path root = fs::path(manifest_path).parent_path();
    Dataset ds;
    for (const auto& jf : j["frames"]) {
        Frame f;
        if (!jf.contains("file_path")) throw DatasetError("frame missing file_path");
        f.file_path = jf["file_path"].get<std::string>();
        CameraModel cam;
        cam.fx = intr(jf, "fl_x", g_fx);
        cam.fy = intr(jf, "fl_y", g_fy);
        cam.cx = intr(jf, "cx", g_cx);
        cam.cy = intr(jf, "cy", g_cy);
        cam.width = int(intr(jf, "w", g_w));
        cam.height = int(intr(jf, "h", g_h));
        if (!jf.contains("transform_matrix")) throw DatasetError("frame missing transform_matrix");
        const auto& tm = jf["transform_matrix"];
        if (!tm.is_array() || tm.size() < 3) throw DatasetError("bad transform_matrix");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c)
                cam.cam_to_world[std::size_t(r * 4 + c)] = tm[std::size_t(r)][std::size_t(c)].get<double>();
        cam.validate();
        f.camera = cam;

        if (opts.load_images) {
            fs::path ip = root / f.file_path;
            if (!fs::exists(ip)) throw DatasetError("missing image file: " + ip.string());
            f.image = img::load_image(ip.string());
            if (f.image.width != cam.width || f.image.height != cam.height)
                throw DatasetError("image size disagrees with the manifest: " + ip.string());
        }
        if (opts.target_size) {
            const auto [tw, th] = *opts.target_size;
            if (opts.load_images) f.image = img::downsample(f.image, tw, th);
            f.camera = f.camera.rescaled(tw, th);
        }
        ds.frames.push_back(std::move(f));
    }
    split_frames(int(ds.frames.size()), opts.split, ds.train_indices, ds.eval_indices);
    return ds;
}

namespace {

// origins/dirs of one ray through exp(delta) * base, templated for complex step.
template <typename T>
void ray_through_delta(const std::array<T, 6>& delta, const Pose& base, const Vec3& dir_cam,
                       T* origin, T* dir) {
    const std::array<T, 12> d = se3_exp(delta);
    // composed = d * base
    T R[9], t[3];
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            T acc = T(0);
            for (int k = 0; k < 3; ++k)
                acc += d[std::size_t(i * 4 + k)] * base[std::size_t(k * 4 + j)];
            R[i * 3 + j] = acc;
        }
        T acc = d[std::size_t(i * 4 + 3)];
        for (int k = 0; k < 3; ++k) acc += d[std::size_t(i * 4 + k)] * base[std::size_t(k * 4 + 3)];
        t[i] = acc;
    }
    T dw[3];
    for (int i = 0; i < 3; ++i)
        dw[i] = R[i * 3 + 0] * dir_cam[0] + R[i * 3 + 1] * dir_cam[1] + R[i * 3 + 2] * dir_cam[2];
    const T n = std::sqrt(dw[0] * dw[0] + dw[1] * dw[1] + dw[2] * dw[2]);
    for (int i = 0; i < 3; ++i) {
        origin[i] = t[i];
        dir[i] = dw[i] / n;
    }
}

}  // namespace

Var pose_rays_node(Tape& t, diff::Parameter& deltas, const RayBatchSpec& spec) {
    const std::size_t n = spec.cameras.size();
    if (spec.pixels.size() != n || spec.delta_rows.size() != n)
        throw ShapeError("pose_rays_node: ragged batch spec");
    if (deltas.value.cols != 6) throw ShapeError("pose_rays_node: delta table must be [K,6]");

    Var delta_leaf = t.leaf(deltas);

    auto dirs_cam = std::make_shared<std::vector<Vec3>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cam = spec.cameras[i];
        const auto [px, py] = spec.pixels[i];
        if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
            throw IndexError("pose_rays_node: pixel out of bounds");
        (*dirs_cam)[i] = pixel_dir_cam(cam, px, py);
    }

    const Tensor& dv = t.value(delta_leaf);
    Tensor out(int64_t(n), 6);
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 6> delta{0, 0, 0, 0, 0, 0};
        const int64_t row = spec.delta_rows[i];
        if (row >= 0) {
            if (row >= dv.rows) throw IndexError("pose_rays_node: delta row out of range");
            for (int k = 0; k < 6; ++k) delta[std::size_t(k)] = dv.at(row, k);
        }
        double origin[3], dir[3];
        ray_through_delta(delta, spec.cameras[i].cam_to_world, (*dirs_cam)[i], origin, dir);
        for (int k = 0; k < 3; ++k) {
            out.at(int64_t(i), k) = origin[k];
            out.at(int64_t(i), 3 + k) = dir[k];
        }
    }

    auto cams = std::make_shared<std::vector<CameraModel>>(spec.cameras);
    auto rows = std::make_shared<std::vector<int64_t>>(spec.delta_rows);
    return t.node(std::move(out), t.needs_grad(delta_leaf),
                  [delta_leaf, cams, rows, dirs_cam](Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& dv2 = tp.value(delta_leaf);
        Tensor& dd = tp.grad(delta_leaf);
        using C = std::complex<double>;
        const double h = 1e-20;
        for (std::size_t i = 0; i < cams->size(); ++i) {
            const int64_t row = (*rows)[i];
            if (row < 0) continue;
            std::array<C, 6> delta;
            for (int k = 0; k < 6; ++k) delta[std::size_t(k)] = C(dv2.at(row, k), 0.0);
            for (int k = 0; k < 6; ++k) {
                delta[std::size_t(k)] += C(0, h);
                C origin[3], dir[3];
                ray_through_delta(delta, (*cams)[i].cam_to_world, (*dirs_cam)[i], origin, dir);
                delta[std::size_t(k)] -= C(0, h);
                double acc = 0;
                for (int c = 0; c < 3; ++c) {
                    acc += g.at(int64_t(i), c) * (origin[c].imag() / h);
                    acc += g.at(int64_t(i), 3 + c) * (dir[c].imag() / h);
                }
                dd.at(row, k) += acc;
            }
        }
    });
}

}  // namespace qnerf::data
