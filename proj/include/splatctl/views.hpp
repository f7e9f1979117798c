// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatctl/splat.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace splatctl {

struct ViewSpec {
    double yaw = 0.0;   ///< degrees, rotation about +y; 0 looks at the face (+z side)
    double pitch = 0.0; ///< degrees, positive raises the camera
    double radius = 3.2;
    Vec3 look_at = Vec3::Zero();
};

struct Intrinsics {
    int width = 512;
    int height = 512;
    double focal = 512.0 * 1.2;
    double near = 0.05;

    /// Default focal scaled with the image so framing is resolution independent.
    static Intrinsics for_size(int width, int height);
};

struct AngleRange {
    double lo = 0.0;
    double hi = 0.0;
};

inline constexpr AngleRange kDefaultYawRange{-60.0, 60.0};
inline constexpr AngleRange kDefaultPitchRange{-30.0, 45.0};
inline constexpr int kDefaultViewsPerSubject = 60;

Camera camera_from_view(const ViewSpec &view, const Intrinsics &intrinsics = {});

struct SampledView {
    ViewSpec spec;
    Camera camera;
};

/// Yaw and pitch drawn uniformly from the ranges with a seeded mt19937_64.
std::vector<SampledView> sample_views(int n, AngleRange yaw, AngleRange pitch, double radius, std::uint64_t seed,
                                      const Intrinsics &intrinsics = {}, const Vec3 &look_at = Vec3::Zero());

enum class SampleKind { Real, Synthetic };

struct SampleLabel {
    SampleKind kind = SampleKind::Real;

    int token_id() const { return kind == SampleKind::Real ? 0 : 1; }
    std::string name() const { return kind == SampleKind::Real ? "real" : "synthetic"; }
};

nlohmann::json camera_to_json(const Camera &cam);
Camera camera_from_json(const nlohmann::json &j);

/// One JSON-lines record of a rendered dataset sample.
nlohmann::json dataset_record(const std::string &subject_id, const ViewSpec &view, const Camera &cam,
                              const SampleLabel &label, const std::string &feature_map_path);

/// Embeds the field on the reference identity driven by the target expression and pose.
EmbeddedGaussians cross_identity_gaussians(const GaussianFieldUV &field, const SurfaceModel &model,
                                           const UVMapping &mapping, std::span<const double> beta_ref,
                                           std::span<const double> psi, const RigidPose &pose);

FeatureMap cross_identity_signal(const GaussianFieldUV &field, const SurfaceModel &model, const UVMapping &mapping,
                                 std::span<const double> beta_ref, std::span<const double> psi,
                                 const RigidPose &pose, const Camera &cam, const RenderOptions &options = {});

struct SweepOptions {
    AngleRange yaw = kDefaultYawRange;
    AngleRange pitch = kDefaultPitchRange;
    double radius = 3.2;
    Intrinsics intrinsics = Intrinsics::for_size(128, 128);
    double tolerance_px = 1e-6;
    /// Every view reuses the first sampled camera.
    bool identical_views = false;
    /// Negative control: views are projected with fx scaled by (1 + corruption) but lifted back with the nominal fx.
    double fx_corruption = 0.0;
    bool render = true;
    RenderOptions render_options{};
};

struct SweepReport {
    int n_views = 0;
    double max_reproj_err = 0.0;
    std::size_t pairs_checked = 0;
    std::size_t points_checked = 0;
    std::vector<double> alpha_coverage; ///< fraction of pixels with alpha > 0.5, per view
    bool pass = true;

    nlohmann::json to_json() const;
};

/// Lifts every Gaussian center from view A's pixel + depth into view B for all ordered pairs and compares
/// against B's direct projection.
SweepReport consistency_sweep(const GaussianFieldUV &field, const SurfaceModel &model, const UVMapping &mapping,
                              const SurfaceState &state, int n_views, std::uint64_t seed,
                              const SweepOptions &options = {});

} // namespace splatctl
