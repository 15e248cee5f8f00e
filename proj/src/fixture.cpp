#include "qnerf/fixture.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace qnerf::fixture {

namespace {

struct Sphere {
    std::array<double, 3> center;
    double radius;
    std::array<double, 3> albedo;
};

const std::array<Sphere, 3>& spheres() {
    static const std::array<Sphere, 3> s = {{
        {{0.0, 0.0, 0.0}, 0.62, {0.88, 0.25, 0.20}},
        {{0.75, 0.25, 0.55}, 0.32, {0.20, 0.75, 0.30}},
        {{-0.65, -0.25, 0.45}, 0.28, {0.25, 0.35, 0.90}},
    }};
    return s;
}

constexpr double kBackground = 0.04;

}  // namespace

std::array<double, 3> trace_scene(const std::array<double, 3>& origin,
                                  const std::array<double, 3>& dir) {
    double best_t = 1e30;
    const Sphere* hit = nullptr;
    for (const auto& s : spheres()) {
        const double ox = origin[0] - s.center[0];
        const double oy = origin[1] - s.center[1];
        const double oz = origin[2] - s.center[2];
        const double b = ox * dir[0] + oy * dir[1] + oz * dir[2];
        const double c = ox * ox + oy * oy + oz * oz - s.radius * s.radius;
        const double disc = b * b - c;
        if (disc < 0) continue;
        const double t = -b - std::sqrt(disc);
        if (t > 1e-4 && t < best_t) {
            best_t = t;
            hit = &s;
        }
    }
    if (!hit) return {kBackground, kBackground, kBackground};

    // Matte shading with a fixed light plus ambient: view-independent, so all
    // views agree on surface color.
    std::array<double, 3> p{origin[0] + best_t * dir[0], origin[1] + best_t * dir[1],
                            origin[2] + best_t * dir[2]};
    std::array<double, 3> n{(p[0] - hit->center[0]) / hit->radius,
                            (p[1] - hit->center[1]) / hit->radius,
                            (p[2] - hit->center[2]) / hit->radius};
    const std::array<double, 3> light{0.43, 0.78, 0.45};
    const double lambert = std::max(0.0, n[0] * light[0] + n[1] * light[1] + n[2] * light[2]);
    const double shade = 0.25 + 0.75 * lambert;
    return {hit->albedo[0] * shade, hit->albedo[1] * shade, hit->albedo[2] * shade};
}

img::Image render_ground_truth(const data::CameraModel& camera) {
    img::Image out(camera.width, camera.height);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            auto ray = data::generate_ray(camera, x, y, 0.1, 100.0);
            auto color = trace_scene(ray.origin, ray.dir);
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = color[std::size_t(c)];
        }
    return out;
}

std::string write_scene(const std::string& dir, const SceneOptions& opts) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    const double fx = 0.9 * opts.width;
    nlohmann::json j;
    j["fl_x"] = fx;
    j["fl_y"] = fx;
    j["cx"] = opts.width / 2.0;
    j["cy"] = opts.height / 2.0;
    j["w"] = opts.width;
    j["h"] = opts.height;
    j["frames"] = nlohmann::json::array();

    Rng rng(derive_seed(opts.seed, 0xF17E));
    for (int i = 0; i < opts.n_views; ++i) {
        const double a = 2.0 * M_PI * i / opts.n_views + 0.03 * rng.uniform(-1, 1);
        const double h = opts.camera_height + 0.15 * rng.uniform(-1, 1);
        auto cam = data::look_at_camera(
            {opts.camera_radius * std::cos(a), h, opts.camera_radius * std::sin(a)},
            {0, 0, 0}, {0, 1, 0}, fx, fx, opts.width, opts.height);
        auto image = render_ground_truth(cam);
        const std::string name = "view_" + std::to_string(i) + ".png";
        img::save_png((fs::path(dir) / name).string(), image);

        nlohmann::json jf;
        jf["file_path"] = name;
        auto tm = nlohmann::json::array();
        for (int r = 0; r < 3; ++r) {
            auto row = nlohmann::json::array();
            for (int c = 0; c < 4; ++c) row.push_back(cam.cam_to_world[std::size_t(r * 4 + c)]);
            tm.push_back(row);
        }
        tm.push_back({0.0, 0.0, 0.0, 1.0});
        jf["transform_matrix"] = tm;
        j["frames"].push_back(jf);
    }
    const std::string manifest = (fs::path(dir) / "transforms.json").string();
    std::ofstream(manifest) << j.dump(1);
    return manifest;
}

}  // namespace qnerf::fixture
