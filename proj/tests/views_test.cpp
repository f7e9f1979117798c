// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/error.hpp"
#include "splatctl/views.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace splatctl {
namespace {

TEST(Views, DefaultsFollowDatasetRanges) {
    EXPECT_EQ(kDefaultViewsPerSubject, 60);
    EXPECT_EQ(kDefaultYawRange.lo, -60.0);
    EXPECT_EQ(kDefaultYawRange.hi, 60.0);
    EXPECT_EQ(kDefaultPitchRange.lo, -30.0);
    EXPECT_EQ(kDefaultPitchRange.hi, 45.0);
    const auto views = sample_views(60, kDefaultYawRange, kDefaultPitchRange, 3.2, 1);
    ASSERT_EQ(views.size(), 60u);
    double yaw_lo = 1e9, yaw_hi = -1e9;
    for (const auto &v : views) {
        EXPECT_GE(v.spec.yaw, -60.0);
        EXPECT_LE(v.spec.yaw, 60.0);
        EXPECT_GE(v.spec.pitch, -30.0);
        EXPECT_LE(v.spec.pitch, 45.0);
        yaw_lo = std::min(yaw_lo, v.spec.yaw);
        yaw_hi = std::max(yaw_hi, v.spec.yaw);
        EXPECT_EQ(v.camera.fx, 512.0 * 1.2);
        EXPECT_EQ(v.camera.fy, 512.0 * 1.2);
        EXPECT_EQ(v.camera.cx, 256.0);
        EXPECT_EQ(v.camera.cy, 256.0);
        EXPECT_NEAR(v.camera.center().norm(), 3.2, 1e-12);
        v.camera.validate();
    }
    // Uniform draws over 120 degrees should reach beyond +-30.
    EXPECT_LT(yaw_lo, -30.0);
    EXPECT_GT(yaw_hi, 30.0);
}

TEST(Views, ZeroViewsIsEmpty) { EXPECT_TRUE(sample_views(0, kDefaultYawRange, kDefaultPitchRange, 3.2, 1).empty()); }

TEST(Views, SameSeedSameCameras) {
    const auto a = sample_views(10, kDefaultYawRange, kDefaultPitchRange, 3.2, 77);
    const auto b = sample_views(10, kDefaultYawRange, kDefaultPitchRange, 3.2, 77);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].spec.yaw, b[i].spec.yaw);
        EXPECT_EQ(a[i].spec.pitch, b[i].spec.pitch);
        EXPECT_EQ(a[i].camera.rotation, b[i].camera.rotation);
        EXPECT_EQ(a[i].camera.translation, b[i].camera.translation);
    }
}

TEST(Views, RejectsBadRanges) {
    for (auto [n, yaw, pitch] : {std::tuple{-1, kDefaultYawRange, kDefaultPitchRange},
                                 std::tuple{3, AngleRange{10.0, -10.0}, kDefaultPitchRange},
                                 std::tuple{3, kDefaultYawRange, AngleRange{0.0, 95.0}}}) {
        try {
            sample_views(n, yaw, pitch, 3.2, 1);
            FAIL();
        } catch (const Error &e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidRange);
        }
    }
}

TEST(Views, FrontalCameraLooksDownMinusZ) {
    const auto cam = camera_from_view(ViewSpec{}, Intrinsics::for_size(64, 64));
    EXPECT_NEAR((cam.center() - Vec3(0, 0, 3.2)).norm(), 0.0, 1e-12);
    const Vec3 origin = cam.to_camera(Vec3::Zero());
    EXPECT_NEAR(origin.x(), 0.0, 1e-12);
    EXPECT_NEAR(origin.y(), 0.0, 1e-12);
    EXPECT_NEAR(origin.z(), 3.2, 1e-12);
    // +y world (up) projects above the principal point.
    EXPECT_LT(cam.to_camera(Vec3(0, 1, 0)).y(), 0.0);
}

TEST(Views, CameraJsonRoundTrip) {
    ViewSpec view;
    view.yaw = 33.0;
    view.pitch = -12.5;
    const auto cam = camera_from_view(view, Intrinsics::for_size(100, 80));
    const auto back = camera_from_json(camera_to_json(cam));
    EXPECT_EQ(back.fx, cam.fx);
    EXPECT_EQ(back.cy, cam.cy);
    EXPECT_EQ(back.width, 100);
    EXPECT_EQ(back.height, 80);
    EXPECT_EQ(back.rotation, cam.rotation);
    EXPECT_EQ(back.translation, cam.translation);
}

TEST(Views, LabelsAndRecords) {
    SampleLabel real;
    SampleLabel synth{SampleKind::Synthetic};
    EXPECT_EQ(real.token_id(), 0);
    EXPECT_EQ(synth.token_id(), 1);
    EXPECT_EQ(real.name(), "real");
    EXPECT_EQ(synth.name(), "synthetic");
    const auto v = sample_views(1, kDefaultYawRange, kDefaultPitchRange, 3.2, 2)[0];
    const auto r = dataset_record("s7", v.spec, v.camera, synth, "maps/s7_000.gsfm");
    EXPECT_EQ(r.at("subject_id"), "s7");
    EXPECT_EQ(r.at("label"), "synthetic");
    EXPECT_EQ(r.at("token_id"), 1);
    EXPECT_EQ(r.at("view").at("yaw"), v.spec.yaw);
    EXPECT_EQ(r.at("view").at("radius"), 3.2);
    EXPECT_EQ(r.at("feature_map_path"), "maps/s7_000.gsfm");
    EXPECT_TRUE(r.at("camera").contains("fx"));
}

struct Demo {
    SurfaceModel model = make_demo_head();
    UVMapping mapping = build_uv_mapping(model, 32);
    GaussianFieldUV field = init_field(32, 4, 5, default_initial_scale(model));
};

TEST(CrossIdentity, SelfSwapEqualsDirectRender) {
    Demo d;
    const std::vector<double> beta = {0.2, 0.1, -0.3, 0.4};
    const std::vector<double> psi = {0.5, 0.0, 0.0, 0.2};
    const auto pose = RigidPose::from_euler_degrees(5.0, 0.0, 0.0, Vec3::Zero());
    const auto cam = camera_from_view(ViewSpec{}, Intrinsics::for_size(64, 64));
    const auto direct = render_tiled(embed(d.field, deform(d.model, beta, psi, pose), d.mapping), cam);
    const auto swapped = cross_identity_signal(d.field, d.model, d.mapping, beta, psi, pose, cam);
    EXPECT_EQ(direct.values, swapped.values);
    EXPECT_EQ(direct.alpha, swapped.alpha);
}

TEST(CrossIdentity, ExpressionsChangeTheMap) {
    Demo d;
    const std::vector<double> beta_ref = {-0.4, 0.3, 0.0, 0.1};
    const auto cam = camera_from_view(ViewSpec{}, Intrinsics::for_size(64, 64));
    const std::vector<double> psi1 = {0.0, 0.0, 0.0, 0.0};
    const std::vector<double> psi2 = {1.0, 0.8, 0.0, 0.0};
    const auto a = cross_identity_signal(d.field, d.model, d.mapping, beta_ref, psi1, RigidPose::identity(), cam);
    const auto b = cross_identity_signal(d.field, d.model, d.mapping, beta_ref, psi2, RigidPose::identity(), cam);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
    }
    EXPECT_GT(diff, 0.01);
}

TEST(CrossIdentity, RejectsWrongCoefficientLength) {
    Demo d;
    const std::vector<double> beta = {0.1};
    const std::vector<double> psi(4, 0.0);
    try {
        cross_identity_gaussians(d.field, d.model, d.mapping, beta, psi, RigidPose::identity());
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::CoefficientLengthMismatch);
    }
}

TEST(Sweep, IdenticalViewsGiveZeroError) {
    Demo d;
    SweepOptions options;
    options.identical_views = true;
    const auto r = consistency_sweep(d.field, d.model, d.mapping, SurfaceState::neutral(d.model), 2, 1, options);
    EXPECT_EQ(r.max_reproj_err, 0.0);
    EXPECT_EQ(r.pairs_checked, 2u);
    EXPECT_GT(r.points_checked, 0u);
    EXPECT_TRUE(r.pass);
}

TEST(Sweep, PaperRangeSweepPasses) {
    Demo d;
    SweepOptions options;
    options.render = false;
    const auto r = consistency_sweep(d.field, d.model, d.mapping, SurfaceState::neutral(d.model), 12, 3, options);
    EXPECT_LT(r.max_reproj_err, 1e-6);
    EXPECT_EQ(r.pairs_checked, 12u * 11u);
    EXPECT_TRUE(r.pass);
}

TEST(Sweep, CorruptedIntrinsicsFail) {
    Demo d;
    SweepOptions options;
    options.render = false;
    options.fx_corruption = 0.01;
    const auto r = consistency_sweep(d.field, d.model, d.mapping, SurfaceState::neutral(d.model), 6, 3, options);
    EXPECT_GT(r.max_reproj_err, 1e-2);
    EXPECT_FALSE(r.pass);
}

TEST(Sweep, ReportsCoveragePerView) {
    Demo d;
    const auto r = consistency_sweep(d.field, d.model, d.mapping, SurfaceState::neutral(d.model), 3, 4);
    ASSERT_EQ(r.alpha_coverage.size(), 3u);
    for (double c : r.alpha_coverage) {
        EXPECT_GT(c, 0.05);
        EXPECT_LE(c, 1.0);
    }
    const auto j = r.to_json();
    EXPECT_EQ(j.at("n_views"), 3);
    EXPECT_EQ(j.at("pass"), true);
}

TEST(Sweep, NeedsTwoViews) { EXPECT_THROW(consistency_sweep(Demo{}.field, make_demo_head(), Demo{}.mapping, {}, 1, 0), Error); }

} // namespace
} // namespace splatctl
