// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/views.hpp"

#include "splatctl/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace splatctl {

Intrinsics Intrinsics::for_size(int width, int height) {
    Intrinsics k;
    k.width = width;
    k.height = height;
    k.focal = 1.2 * width;
    return k;
}

Camera camera_from_view(const ViewSpec &view, const Intrinsics &intrinsics) {
    if (!(view.radius > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "view radius must be positive");
    }
    constexpr double deg = std::numbers::pi / 180.0;
    const double yaw = view.yaw * deg;
    const double pitch = view.pitch * deg;
    const Vec3 offset(std::sin(yaw) * std::cos(pitch), std::sin(pitch), std::cos(yaw) * std::cos(pitch));
    const Vec3 eye = view.look_at + view.radius * offset;

    // Camera axes: x right, y down, z toward the target.
    const Vec3 forward = (view.look_at - eye).normalized();
    const Vec3 right = forward.cross(Vec3::UnitY()).normalized();
    const Vec3 down = forward.cross(right);

    Camera cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -(cam.rotation * eye);
    cam.fx = intrinsics.focal;
    cam.fy = intrinsics.focal;
    cam.cx = intrinsics.width / 2.0;
    cam.cy = intrinsics.height / 2.0;
    cam.width = intrinsics.width;
    cam.height = intrinsics.height;
    cam.near = intrinsics.near;
    return cam;
}

std::vector<SampledView> sample_views(int n, AngleRange yaw, AngleRange pitch, double radius, std::uint64_t seed,
                                      const Intrinsics &intrinsics, const Vec3 &look_at) {
    if (n < 0) {
        throw Error(ErrorCode::InvalidRange, "view count must be >= 0");
    }
    if (!(yaw.lo <= yaw.hi) || !(pitch.lo <= pitch.hi)) {
        throw Error(ErrorCode::InvalidRange, "angle ranges must satisfy lo <= hi");
    }
    if (pitch.lo <= -90.0 || pitch.hi >= 90.0) {
        throw Error(ErrorCode::InvalidRange, "pitch must stay strictly inside (-90, 90) degrees");
    }
    if (!(radius > 0.0)) {
        throw Error(ErrorCode::InvalidRange, "radius must be positive");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<SampledView> views;
    views.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ViewSpec spec;
        spec.yaw = yaw.lo + unit(rng) * (yaw.hi - yaw.lo);
        spec.pitch = pitch.lo + unit(rng) * (pitch.hi - pitch.lo);
        spec.radius = radius;
        spec.look_at = look_at;
        views.push_back({spec, camera_from_view(spec, intrinsics)});
    }
    return views;
}

nlohmann::json camera_to_json(const Camera &cam) {
    nlohmann::json rot = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) {
        rot.push_back({cam.rotation(r, 0), cam.rotation(r, 1), cam.rotation(r, 2)});
    }
    return {{"fx", cam.fx},
            {"fy", cam.fy},
            {"cx", cam.cx},
            {"cy", cam.cy},
            {"width", cam.width},
            {"height", cam.height},
            {"near", cam.near},
            {"rotation", rot},
            {"translation", {cam.translation.x(), cam.translation.y(), cam.translation.z()}}};
}

Camera camera_from_json(const nlohmann::json &j) {
    try {
        Camera cam;
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.near = j.value("near", 0.01);
        if (j.contains("rotation")) {
            const auto &r = j.at("rotation");
            for (int row = 0; row < 3; ++row) {
                for (int col = 0; col < 3; ++col) {
                    cam.rotation(row, col) = r.at(row).at(col).get<double>();
                }
            }
        }
        if (j.contains("translation")) {
            const auto &t = j.at("translation");
            cam.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
        }
        cam.validate();
        return cam;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::InvalidArgument, std::string("camera JSON: ") + e.what());
    }
}

nlohmann::json dataset_record(const std::string &subject_id, const ViewSpec &view, const Camera &cam,
                              const SampleLabel &label, const std::string &feature_map_path) {
    return {{"subject_id", subject_id},
            {"view", {{"yaw", view.yaw}, {"pitch", view.pitch}, {"radius", view.radius}}},
            {"camera", camera_to_json(cam)},
            {"label", label.name()},
            {"token_id", label.token_id()},
            {"feature_map_path", feature_map_path}};
}

EmbeddedGaussians cross_identity_gaussians(const GaussianFieldUV &field, const SurfaceModel &model,
                                           const UVMapping &mapping, std::span<const double> beta_ref,
                                           std::span<const double> psi, const RigidPose &pose) {
    return embed(field, deform(model, beta_ref, psi, pose), mapping);
}

FeatureMap cross_identity_signal(const GaussianFieldUV &field, const SurfaceModel &model, const UVMapping &mapping,
                                 std::span<const double> beta_ref, std::span<const double> psi,
                                 const RigidPose &pose, const Camera &cam, const RenderOptions &options) {
    return render_tiled(cross_identity_gaussians(field, model, mapping, beta_ref, psi, pose), cam, options);
}

nlohmann::json SweepReport::to_json() const {
    return {{"n_views", n_views},
            {"max_reproj_err", max_reproj_err},
            {"pairs_checked", pairs_checked},
            {"points_checked", points_checked},
            {"alpha_coverage", alpha_coverage},
            {"pass", pass}};
}

namespace {

bool same_camera(const Camera &a, const Camera &b) {
    return a.fx == b.fx && a.fy == b.fy && a.cx == b.cx && a.cy == b.cy && a.rotation == b.rotation &&
           a.translation == b.translation;
}

} // namespace

SweepReport consistency_sweep(const GaussianFieldUV &field, const SurfaceModel &model, const UVMapping &mapping,
                              const SurfaceState &state, int n_views, std::uint64_t seed,
                              const SweepOptions &options) {
    if (n_views < 2) {
        throw Error(ErrorCode::InvalidArgument, "consistency sweep needs at least 2 views");
    }
    auto views = sample_views(n_views, options.yaw, options.pitch, options.radius, seed, options.intrinsics);
    if (options.identical_views) {
        for (auto &v : views) {
            v = views.front();
        }
    }
    const auto gaussians = embed(field, deform(model, state), mapping);

    SweepReport report;
    report.n_views = n_views;
    if (options.render) {
        for (const auto &v : views) {
            const auto map = render_tiled(gaussians, v.camera, options.render_options);
            const auto covered = std::count_if(map.alpha.begin(), map.alpha.end(), [](double a) { return a > 0.5; });
            report.alpha_coverage.push_back(static_cast<double>(covered) / static_cast<double>(map.alpha.size()));
        }
    }

    // Camera-space points for each view, computed once.
    const std::size_t n = gaussians.size();
    std::vector<std::vector<Vec3>> cam_points(views.size());
    for (std::size_t v = 0; v < views.size(); ++v) {
        cam_points[v].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            cam_points[v][i] = views[v].camera.to_camera(gaussians.positions[i]);
        }
    }

    for (std::size_t a = 0; a < views.size(); ++a) {
        const Camera &ca = views[a].camera;
        const double fx_seen = ca.fx * (1.0 + options.fx_corruption);
        const Mat3 lift = ca.rotation.transpose();
        for (std::size_t b = 0; b < views.size(); ++b) {
            if (a == b) {
                continue;
            }
            const Camera &cb = views[b].camera;
            // Coincident cameras transfer every pixel onto itself.
            const bool coincident = same_camera(ca, cb);
            ++report.pairs_checked;
            for (std::size_t i = 0; i < n; ++i) {
                const Vec3 &pa = cam_points[a][i];
                const Vec3 &pb = cam_points[b][i];
                if (!(pa.z() > ca.near) || !(pb.z() > cb.near)) {
                    continue;
                }
                const double u = fx_seen * pa.x() / pa.z() + ca.cx;
                const double v = ca.fy * pa.y() / pa.z() + ca.cy;
                Vec2 transferred(u, v);
                if (!coincident) {
                    const double depth = pa.z();
                    const Vec3 lifted_cam((u - ca.cx) / ca.fx * depth, (v - ca.cy) / ca.fy * depth, depth);
                    const Vec3 world = lift * (lifted_cam - ca.translation);
                    const Vec3 qb = cb.to_camera(world);
                    transferred = Vec2(cb.fx * qb.x() / qb.z() + cb.cx, cb.fy * qb.y() / qb.z() + cb.cy);
                }
                const Vec2 direct(cb.fx * pb.x() / pb.z() + cb.cx, cb.fy * pb.y() / pb.z() + cb.cy);
                report.max_reproj_err = std::max(report.max_reproj_err, (transferred - direct).norm());
                ++report.points_checked;
            }
        }
    }
    report.pass = report.max_reproj_err < options.tolerance_px;
    return report;
}

} // namespace splatctl
