#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qnerf/diff.hpp"
#include "qnerf/image.hpp"
#include "qnerf/sampling.hpp"

namespace qnerf::data {

using Vec3 = std::array<double, 3>;

// Rigid transform as a row-major 3x4 [R | t] block.
using Pose = std::array<double, 12>;

Pose pose_identity();
Pose pose_compose(const Pose& a, const Pose& b);  // a then b? no: returns a*b
Vec3 pose_apply_point(const Pose& p, const Vec3& x);
Vec3 pose_apply_dir(const Pose& p, const Vec3& d);

// SE(3) exponential/log maps; delta packs (translation u, rotation omega)
// as (u0,u1,u2, w0,w1,w2). Templated on the scalar so derivatives can be
// taken by complex step.
template <typename T>
std::array<T, 12> se3_exp(const std::array<T, 6>& delta);
std::array<double, 6> se3_log(const Pose& p);

// Rotation geodesic distance and translation distance between two poses.
double rotation_angle_between(const Pose& a, const Pose& b);
double translation_distance(const Pose& a, const Pose& b);

// Pinhole camera, OpenGL convention: x right, y up, camera looks along -z.
struct CameraModel {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Pose cam_to_world = pose_identity();

    void validate() const;  // orthonormal R with det +1, positive intrinsics
    CameraModel rescaled(int new_width, int new_height) const;
};

// T' = exp(delta) * T.
CameraModel apply_pose_delta(const CameraModel& cam, const std::array<double, 6>& delta);

// OpenGL-convention camera at `pos` looking toward `target`.
CameraModel look_at_camera(const Vec3& pos, const Vec3& target, const Vec3& up, double fx,
                           double fy, int width, int height);

// Ray through the center of pixel (px, py); near/far supplied by the scene.
sampling::Ray generate_ray(const CameraModel& cam, int px, int py, double near, double far);

struct SplitSpec {
    double train_fraction = 0.9;
    uint64_t seed = 0;
};

// Deterministic disjoint split; eval gets floor(n * (1 - train_fraction)).
void split_frames(int n_frames, const SplitSpec& spec, std::vector<int>& train,
                  std::vector<int>& eval);

struct Frame {
    std::string file_path;
    CameraModel camera;
    img::Image image;
};

struct Dataset {
    std::vector<Frame> frames;
    std::vector<int> train_indices;
    std::vector<int> eval_indices;

    std::string summary() const;
};

struct LoadOptions {
    // Downsample every image (and intrinsics) to this size when set.
    std::optional<std::pair<int, int>> target_size;  // (width, height)
    SplitSpec split;
    bool load_images = true;
};

// Reads a camera manifest (JSON: fl_x, fl_y, cx, cy, w, h,
// frames[{file_path, transform_matrix}]) plus its images.
Dataset load_dataset(const std::string& manifest_path, const LoadOptions& opts = {});

// ---- differentiable ray batch ----------------------------------------------

struct RayBatchSpec {
    // Per ray: the camera, the pixel, and the row of the pose-delta table to
    // optimize through (-1 keeps the camera frozen).
    std::vector<CameraModel> cameras;
    std::vector<std::pair<int, int>> pixels;
    std::vector<int64_t> delta_rows;
};

// Emits [N,6] rows (origin, unit direction) through exp(delta) * cam_to_world.
// Backward maps gradients onto the delta table by complex-step Jacobians.
diff::Var pose_rays_node(diff::Tape& t, diff::Parameter& deltas, const RayBatchSpec& spec);

}  // namespace qnerf::data
