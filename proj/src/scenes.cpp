// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/scenes.hpp"

#include "splatctl/fit.hpp"
#include "splatctl/views.hpp"

#include <cmath>
#include <random>

namespace splatctl::scenes {

Camera axis_camera(int width, int height, double focal) {
    Camera cam;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = (width - 1) / 2.0;
    cam.cy = (height - 1) / 2.0;
    cam.width = width;
    cam.height = height;
    cam.near = 0.01;
    return cam;
}

Scene point_scene(std::string name, const std::vector<Vec3> &points, int channels, const Camera &camera) {
    int res = 1;
    while (static_cast<std::size_t>(res) * res < points.size()) {
        ++res;
    }
    Scene scene;
    scene.name = std::move(name);
    auto &m = scene.model;
    // Each UV triangle has its first corner on the texel center, so the center binds with barycentric (1,0,0).
    const double delta = 0.25 / res;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto base = static_cast<std::uint32_t>(m.template_vertices.size());
        m.template_vertices.push_back(points[i]);
        m.template_vertices.push_back(points[i] + Vec3(1e-3, 0.0, 0.0));
        m.template_vertices.push_back(points[i] + Vec3(0.0, 1e-3, 0.0));
        m.faces.push_back({base, base + 1, base + 2});
        const double col = static_cast<double>(i % res);
        const double row = static_cast<double>(i / res);
        const Vec2 center((col + 0.5) / res, (row + 0.5) / res);
        m.uv_coords.push_back(center);
        m.uv_coords.push_back(center + Vec2(delta, 0.0));
        m.uv_coords.push_back(center + Vec2(0.0, delta));
    }
    m.validate();
    scene.state = SurfaceState::neutral(m);
    scene.mapping = build_uv_mapping(m, res);
    scene.field = init_field(res, channels, 1, 1.0);
    scene.camera = camera;
    return scene;
}

namespace {

/// Sets a texel's raw scale so its Gaussian has the given pixel sigma under the scene camera.
void set_pixel_sigma(Scene &scene, std::size_t texel, const Vec3 &point, double sigma_px) {
    const double z = scene.camera.to_camera(point).z();
    scene.field.raw_scale[texel] = std::log(sigma_px * z / scene.camera.fx);
}

Vec3 unproject(const Camera &cam, double u, double v, double z) {
    return Vec3((u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z);
}

} // namespace

Scene random_point_scene(std::uint64_t seed, int n, int channels) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto cam = axis_camera(16, 16, 20.0);
    std::vector<Vec3> points;
    std::vector<double> sigmas;
    for (int i = 0; i < n; ++i) {
        const double z = 2.0 + 2.0 * unit(rng);
        points.push_back(unproject(cam, 1.0 + 13.0 * unit(rng), 1.0 + 13.0 * unit(rng), z));
        sigmas.push_back(1.5 + 2.5 * unit(rng));
    }
    auto scene = point_scene("random-" + std::to_string(seed), points, channels, cam);
    std::uniform_real_distribution<double> feature(-1.0, 1.0);
    std::uniform_real_distribution<double> opacity(-1.0, 2.0);
    for (auto &x : scene.field.raw_feature) {
        x = feature(rng);
    }
    for (auto &x : scene.field.raw_opacity) {
        x = opacity(rng);
    }
    for (int i = 0; i < n; ++i) {
        set_pixel_sigma(scene, static_cast<std::size_t>(i), points[i], sigmas[i]);
    }
    return scene;
}

Scene occlusion_scene() {
    const auto cam = axis_camera(16, 16, 20.0);
    const std::vector<Vec3> points = {
        unproject(cam, 7.5, 7.5, 2.0),  // saturating occluder
        unproject(cam, 7.5, 7.5, 3.0),  // fully hidden
        unproject(cam, 1.0, 1.0, 3.0),  // partially hidden
        unproject(cam, 3.0, 12.0, 1.5), // visible
        unproject(cam, 12.0, 3.0, 1.5), // visible
        unproject(cam, 12.5, 12.5, 1.2) // visible
    };
    const std::vector<double> sigma = {200.0, 0.8, 1.2, 1.8, 2.2, 1.6};
    const std::vector<double> raw_opacity = {16.0, 1.0, 1.0, 0.3, -0.4, 0.8};
    auto scene = point_scene("occlusion", points, 3, cam);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> feature(-1.0, 1.0);
    for (auto &x : scene.field.raw_feature) {
        x = feature(rng);
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        scene.field.raw_opacity[i] = raw_opacity[i];
        set_pixel_sigma(scene, i, points[i], sigma[i]);
    }
    return scene;
}

Scene demo_scene(int resolution, int image_size, std::uint64_t seed) {
    Scene scene;
    scene.name = "demo-head-r" + std::to_string(resolution);
    scene.model = make_demo_head();
    scene.state = SurfaceState::neutral(scene.model);
    scene.state.beta = {0.5, -0.3, 0.2, 0.4};
    scene.state.psi = {0.8, 0.0, -0.5, 0.3};
    scene.mapping = build_uv_mapping(scene.model, resolution);
    // Coarse grids need larger footprints than the mesh-derived default to overlap.
    const double spacing = 3.0 / resolution;
    scene.field = plant_field(resolution, 4, seed, std::max(default_initial_scale(scene.model), 0.6 * spacing));
    ViewSpec view;
    view.yaw = 15.0;
    view.pitch = 10.0;
    scene.camera = camera_from_view(view, Intrinsics::for_size(image_size, image_size));
    return scene;
}

std::vector<Scene> gradient_fixtures() {
    std::vector<Scene> fixtures;
    for (std::uint64_t seed : {1, 2, 3}) {
        fixtures.push_back(random_point_scene(seed, 5, 3));
    }
    fixtures.push_back(random_point_scene(4, 12, 8));
    fixtures.push_back(occlusion_scene());
    fixtures.push_back(demo_scene());
    return fixtures;
}

EmbeddedGaussians random_gaussians(std::uint64_t seed, std::size_t n, const Camera &cam, int channels) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    EmbeddedGaussians g;
    g.channels = channels;
    const Mat3 to_world = cam.rotation.transpose();
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 + 4.0 * unit(rng);
        const double u = -5.0 + (cam.width + 10.0) * unit(rng);
        const double v = -5.0 + (cam.height + 10.0) * unit(rng);
        const Vec3 p_cam = unproject(cam, u, v, z);
        g.positions.push_back(to_world * (p_cam - cam.translation));
        const double sigma_px = 0.5 + 6.0 * unit(rng) * unit(rng);
        g.scales.push_back(sigma_px * z / cam.fx);
        g.opacities.push_back(sigmoid(-2.0 + 6.0 * unit(rng)));
        for (int c = 0; c < channels; ++c) {
            g.features.push_back(std::tanh(-2.0 + 4.0 * unit(rng)));
        }
        g.source_texel.push_back(static_cast<std::uint32_t>(i));
    }
    return g;
}

} // namespace splatctl::scenes
