#pragma once

#include <string>

#include "qnerf/dataset.hpp"

namespace qnerf::fixture {

// Analytic test scene: three matte spheres over a dark background, rendered
// by direct ray casting. Views circle the origin.
struct SceneOptions {
    int n_views = 8;
    int width = 64;
    int height = 36;
    double camera_radius = 3.0;
    double camera_height = 0.6;
    uint64_t seed = 0;
};

// Ground-truth color along one ray (unit direction).
std::array<double, 3> trace_scene(const std::array<double, 3>& origin,
                                  const std::array<double, 3>& dir);

img::Image render_ground_truth(const data::CameraModel& camera);

// Writes transforms.json plus PNG frames into `dir`; returns the manifest path.
std::string write_scene(const std::string& dir, const SceneOptions& opts = {});

}  // namespace qnerf::fixture
