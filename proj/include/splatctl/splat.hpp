// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatctl/field.hpp"

#include <vector>

namespace splatctl {

/// Pinhole camera. `rotation`/`translation` map world points into camera space
/// (x right, y down, z forward). Pixel (i, j) is sampled at image coordinate (i, j).
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int width = 1;
    int height = 1;
    double near = 0.01;

    void validate() const;
    Vec3 to_camera(const Vec3 &world) const { return rotation * world + translation; }
    /// World-space camera center.
    Vec3 center() const { return -(rotation.transpose() * translation); }
};

struct ProjectedGaussian {
    Vec2 pixel_center;
    double depth = 0.0;
    double pixel_radius_sigma = 0.0;
    std::size_t index = 0;
};

/// H x W x C feature image (pixel-major, channel fastest) plus the accumulated alpha plane.
struct FeatureMap {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> values;
    std::vector<double> alpha;

    FeatureMap() = default;
    FeatureMap(int w, int h, int c)
        : width(w), height(h), channels(c), values(static_cast<std::size_t>(w) * h * c, 0.0),
          alpha(static_cast<std::size_t>(w) * h, 0.0) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    double value(int x, int y, int c) const {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double alpha_at(int x, int y) const { return alpha[static_cast<std::size_t>(y) * width + x]; }
};

// Blending constants shared by every renderer and the backward pass.
inline constexpr double kAlphaClamp = 0.9999;
inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr double kSupportSigmas = 3.0;

enum class Precision { Float64, Float32 };

struct RenderOptions {
    int tile_size = 16;
    /// 0 picks GSPLAT_THREADS or the machine's core count.
    int threads = 0;
    Precision precision = Precision::Float64;
};

/// Resolves a requested thread count: explicit > GSPLAT_THREADS > hardware concurrency.
int resolve_thread_count(int requested);

std::vector<ProjectedGaussian> project(const EmbeddedGaussians &g, const Camera &cam);

/// Reference renderer: every pixel visits every projected Gaussian in depth order.
FeatureMap render_bruteforce(const EmbeddedGaussians &g, const Camera &cam);

/// Binned renderer with the same per-pixel blend order as render_bruteforce.
FeatureMap render_tiled(const EmbeddedGaussians &g, const Camera &cam, const RenderOptions &options = {});

} // namespace splatctl
