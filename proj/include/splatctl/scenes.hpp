// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Seeded fixture scenes shared by the test suites, the acceptance harness and `splatctl gradcheck`.

#include "splatctl/splat.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace splatctl::scenes {

/// Everything grad_check needs: a surface instance, its UV mapping, a field and a camera.
struct Scene {
    std::string name;
    SurfaceModel model;
    SurfaceState state;
    UVMapping mapping;
    GaussianFieldUV field;
    Camera camera;
};

/// Looks down +z from the origin; pixel centers span [0, width-1] x [0, height-1].
Camera axis_camera(int width, int height, double focal);

/// One Gaussian per mapped texel, pinned at explicit world points through tiny per-point triangles.
/// Texels beyond `points.size()` stay unmapped.
Scene point_scene(std::string name, const std::vector<Vec3> &points, int channels, const Camera &camera);

/// `n` Gaussians scattered in the frustum of a 16x16 camera with random raw attributes.
Scene random_point_scene(std::uint64_t seed, int n = 5, int channels = 3);

/// A broad Gaussian whose alpha saturates at the clamp over a small Gaussian directly behind it,
/// a second one partially hidden near the image corner, and three unoccluded ones in front.
Scene occlusion_scene();

/// The demo head at a coarse UV resolution with a planted field, seen from the front.
Scene demo_scene(int resolution = 8, int image_size = 32, std::uint64_t seed = 3);

/// Every scene the gradient suite must pass.
std::vector<Scene> gradient_fixtures();

/// Random world-space Gaussians in front of `cam`, for renderer equivalence tests.
EmbeddedGaussians random_gaussians(std::uint64_t seed, std::size_t n, const Camera &cam, int channels);

} // namespace splatctl::scenes
