// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatctl/surface.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatctl {

inline constexpr int kDefaultFieldResolution = 256;
inline constexpr int kDefaultFieldChannels = 8;

/// Learnable per-texel attributes, all unconstrained. Texel order matches UVMapping.
struct GaussianFieldUV {
    int resolution = 0;
    int channels = 0;
    std::vector<double> raw_feature; ///< [texel][channel]
    std::vector<double> raw_opacity; ///< [texel]
    std::vector<double> raw_scale;   ///< [texel]

    std::size_t texel_count() const { return static_cast<std::size_t>(resolution) * resolution; }
    void validate() const;
};

struct ActivatedTexel {
    std::vector<double> feature;
    double opacity = 0.0;
    double scale = 0.0;
};

/// World-space isotropic Gaussians, one per mapped texel, in row-major texel order.
struct EmbeddedGaussians {
    int channels = 0;
    std::vector<Vec3> positions;
    std::vector<double> scales;
    std::vector<double> opacities;
    std::vector<double> features; ///< [gaussian][channel]
    std::vector<std::uint32_t> source_texel;

    std::size_t size() const { return positions.size(); }
};

double sigmoid(double x);

/// Features ~ U(-0.1, 0.1) from a seeded mt19937_64, opacity logit 0, raw scale ln(initial_scale).
GaussianFieldUV init_field(int resolution, int channels, std::uint64_t seed, double initial_scale = 1.0);

/// 0.7 x median template edge length: neighbouring texel Gaussians overlap at init.
double default_initial_scale(const SurfaceModel &model);

ActivatedTexel activate(const GaussianFieldUV &field, std::size_t texel);

EmbeddedGaussians embed(const GaussianFieldUV &field, const DeformedMesh &mesh, const UVMapping &mapping);

void save_field(const GaussianFieldUV &field, const std::filesystem::path &path);
GaussianFieldUV load_field(const std::filesystem::path &path);

} // namespace splatctl
