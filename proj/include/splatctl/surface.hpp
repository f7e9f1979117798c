// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace splatctl {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Face = std::array<std::uint32_t, 3>;

/**
 * Linear blendshape surface with a per-face-corner UV atlas.
 *
 * Basis tensors are stored flat with layout [vertex][axis][coefficient], so the
 * offset of vertex v along axis a for coefficient k lives at
 * `(v * 3 + a) * n + k`.
 */
struct SurfaceModel {
    std::vector<Vec3> template_vertices;
    std::vector<Face> faces;
    std::size_t n_shape = 0;
    std::size_t n_expr = 0;
    std::vector<double> shape_basis;
    std::vector<double> expr_basis;
    /// Three UV corners per face, in face order.
    std::vector<Vec2> uv_coords;

    std::size_t num_vertices() const { return template_vertices.size(); }
    std::size_t num_faces() const { return faces.size(); }

    /// Throws MalformedContainer naming the first violated invariant.
    void validate() const;
};

struct RigidPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidPose identity() { return {}; }
    /// Rotation composed as R = Ry(yaw) * Rx(pitch) * Rz(roll), angles in degrees.
    static RigidPose from_euler_degrees(double yaw, double pitch, double roll, const Vec3 &t = Vec3::Zero());

    void validate() const;
};

/// Coefficients and pose that select one deformed instance of a SurfaceModel.
struct SurfaceState {
    std::vector<double> beta;
    std::vector<double> psi;
    RigidPose pose;

    static SurfaceState neutral(const SurfaceModel &model);
};

struct DeformedMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
};

struct TexelBinding {
    std::uint32_t face_id = 0;
    std::array<double, 3> barycentric{};
};

/// Inverse UV lookup sampled at texel centers. Texel index is `row * resolution + col`
/// where the texel center is ((col + 0.5) / res, (row + 0.5) / res) in (u, v).
struct UVMapping {
    int resolution = 0;
    std::vector<std::optional<TexelBinding>> entries;

    std::size_t mapped_count() const;
};

SurfaceModel load_surface(const std::filesystem::path &path);
void save_surface(const SurfaceModel &model, const std::filesystem::path &path);

DeformedMesh deform(const SurfaceModel &model, std::span<const double> beta, std::span<const double> psi,
                    const RigidPose &pose);

inline DeformedMesh deform(const SurfaceModel &model, const SurfaceState &state) {
    return deform(model, state.beta, state.psi, state.pose);
}

UVMapping build_uv_mapping(const SurfaceModel &model, int resolution);

Vec3 surface_point(const DeformedMesh &mesh, const TexelBinding &binding);

/// Median length over all unique template edges.
double median_edge_length(const SurfaceModel &model);

/// Procedural head-like asset: a level-4 subdivided icosahedron (2562 vertices)
/// with 4 shape and 4 expression blendshapes and an atlas that tiles [0,1]^2
/// completely, so every texel of any grid resolution is mapped.
SurfaceModel make_demo_head();

} // namespace splatctl
