// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/error.hpp"
#include "splatctl/fit.hpp"
#include "splatctl/views.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace splatctl {
namespace {

TEST(Adam, ZeroGradientIsFixedPoint) {
    std::vector<double> p = {1.0, -2.0, 3.5};
    const std::vector<double> g(3, 0.0);
    auto state = OptimState::for_size(3);
    opt_step(p, g, state);
    EXPECT_EQ(p, std::vector<double>({1.0, -2.0, 3.5}));
    EXPECT_EQ(state.step_count, 1u);
}

TEST(Adam, FirstStepWorkedExample) {
    std::vector<double> p = {1.0};
    const std::vector<double> g = {1.0};
    auto state = OptimState::for_size(1, 0.01);
    opt_step(p, g, state);
    EXPECT_NEAR(p[0], 1.0 - 0.01 / (1.0 + 1e-8), 1e-15);
    EXPECT_NEAR(p[0], 0.99, 1e-9);
}

TEST(Adam, QuadraticConverges) {
    std::vector<double> p = {0.0};
    auto state = OptimState::for_size(1, 0.01);
    int steps = 0;
    for (; steps < 2000 && std::abs(p[0] - 3.0) >= 1e-4; ++steps) {
        const std::vector<double> g = {2.0 * (p[0] - 3.0)};
        opt_step(p, g, state);
    }
    EXPECT_LT(std::abs(p[0] - 3.0), 1e-4) << "after " << steps << " steps";
}

TEST(Adam, ZeroLearningRateIsIdentity) {
    std::vector<double> p = {0.25, -4.0};
    const std::vector<double> g = {3.0, -1.0};
    auto state = OptimState::for_size(2, 0.0);
    for (int i = 0; i < 5; ++i) {
        opt_step(p, g, state);
    }
    EXPECT_EQ(p, std::vector<double>({0.25, -4.0}));
    EXPECT_EQ(state.step_count, 5u);
    EXPECT_NE(state.m[0], 0.0);
    EXPECT_GT(state.v[1], 0.0);
}

TEST(Adam, RejectsShapeMismatch) {
    std::vector<double> p = {1.0, 2.0};
    const std::vector<double> g = {1.0};
    auto state = OptimState::for_size(2);
    try {
        opt_step(p, g, state);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

struct SmallSetup {
    SurfaceModel model = make_demo_head();
    UVMapping mapping = build_uv_mapping(model, 8);
    std::vector<TrainingView> views;

    SmallSetup() {
        for (const auto &v : sample_views(2, kDefaultYawRange, kDefaultPitchRange, 3.2, 4, Intrinsics::for_size(24, 24))) {
            views.push_back({v.camera, SurfaceState::neutral(model)});
        }
    }
};

TEST(FitDirect, AlreadyOptimalStaysAtZero) {
    SmallSetup s;
    const auto field = plant_field(8, 3, 2, 0.3);
    std::vector<FeatureMap> targets;
    for (const auto &v : s.views) {
        targets.push_back(render_tiled(embed(field, deform(s.model, v.state), s.mapping), v.camera));
    }
    FitOptions options;
    options.iters = 10;
    const auto r = fit_direct(field, s.model, s.mapping, s.views, targets, options);
    ASSERT_EQ(r.loss_trace.size(), 10u);
    for (double l : r.loss_trace) {
        EXPECT_LT(l, 1e-12);
    }
}

TEST(FitDirect, LossDecreasesAndIsDeterministic) {
    SmallSetup s;
    const auto hidden = plant_field(8, 3, 2, 0.3);
    std::vector<FeatureMap> targets;
    for (const auto &v : s.views) {
        targets.push_back(render_tiled(embed(hidden, deform(s.model, v.state), s.mapping), v.camera));
    }
    FitOptions options;
    options.iters = 60;
    const auto start = init_field(8, 3, 9, 0.3);
    const auto a = fit_direct(start, s.model, s.mapping, s.views, targets, options);
    options.render.threads = 1;
    const auto b = fit_direct(start, s.model, s.mapping, s.views, targets, options);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
    EXPECT_EQ(a.field.raw_feature, b.field.raw_feature);
    EXPECT_LT(a.loss_trace.back(), 0.5 * a.loss_trace.front());
    for (double l : a.loss_trace) {
        EXPECT_TRUE(std::isfinite(l));
    }
}

TEST(FitDirect, RejectsMismatchedTargets) {
    SmallSetup s;
    std::vector<FeatureMap> targets = {FeatureMap(24, 24, 3)};
    try {
        fit_direct(init_field(8, 3, 1, 0.3), s.model, s.mapping, s.views, targets, {});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(FitProxy, ZeroTargetAndZeroDecoderStayAtZero) {
    SmallSetup s;
    std::vector<std::vector<double>> targets(s.views.size(), std::vector<double>(24 * 24 * 3, 0.0));
    FitOptions options;
    options.iters = 5;
    const auto start = init_field(8, 3, 1, 0.3);
    const auto r = fit_proxy(start, ProxyDecoder::zeros(3), s.model, s.mapping, s.views, targets, options);
    for (double l : r.loss_trace) {
        EXPECT_EQ(l, 0.0);
    }
    EXPECT_EQ(r.field.raw_feature, start.raw_feature);
    for (double w : r.decoder.weights) {
        EXPECT_EQ(w, 0.0);
    }
}

TEST(FitProxy, DecoderChannelMismatch) {
    SmallSetup s;
    std::vector<std::vector<double>> targets(s.views.size(), std::vector<double>(24 * 24 * 3, 0.0));
    EXPECT_THROW(fit_proxy(init_field(8, 3, 1, 0.3), ProxyDecoder::zeros(4), s.model, s.mapping, s.views, targets, {}),
                 Error);
}

TEST(ProxyDecoder, DecodeIsAffinePerPixel) {
    FeatureMap map(2, 1, 2);
    map.values = {0.5, -1.0, 0.25, 0.0};
    ProxyDecoder d = ProxyDecoder::zeros(2);
    // rows: [w0, w1, bias]
    d.weights = {1.0, 2.0, 0.5, 0.0, -1.0, 0.0, 3.0, 0.0, -0.25};
    const auto rgb = d.decode(map);
    ASSERT_EQ(rgb.size(), 6u);
    EXPECT_DOUBLE_EQ(rgb[0], 0.5 - 2.0 + 0.5);
    EXPECT_DOUBLE_EQ(rgb[1], 1.0);
    EXPECT_DOUBLE_EQ(rgb[2], 1.5 - 0.25);
    EXPECT_DOUBLE_EQ(rgb[3], 0.25 + 0.5);
    EXPECT_DOUBLE_EQ(rgb[4], 0.0);
    EXPECT_DOUBLE_EQ(rgb[5], 0.75 - 0.25);
}

TEST(Experiments, SmallProxyRunIsDeterministic) {
    ExperimentConfig config;
    config.resolution = 8;
    config.channels = 4;
    config.image_size = 24;
    config.n_views = 2;
    config.iters = 30;
    const auto model = make_demo_head();
    const auto a = run_proxy_experiment(model, config);
    const auto b = run_proxy_experiment(model, config);
    EXPECT_EQ(a.fit.loss_trace, b.fit.loss_trace);
    EXPECT_EQ(a.fit.decoder.weights, b.fit.decoder.weights);
    EXPECT_LT(a.fit.loss_trace.back(), a.fit.loss_trace.front());
    EXPECT_GT(a.initial_variance, 0.0);
    EXPECT_GT(a.expression_max_diff, 0.01);
}

TEST(Metrics, MseAndVariance) {
    FeatureMap a(2, 1, 2);
    FeatureMap b(2, 1, 2);
    a.values = {1.0, 0.0, 0.0, 0.0};
    EXPECT_DOUBLE_EQ(feature_mse(a, b), 0.25);
    EXPECT_EQ(channel_variance(b), 0.0);
    EXPECT_THROW(feature_mse(a, FeatureMap(1, 1, 2)), Error);
}

TEST(ExperimentConfig, JsonRecordsSeeds) {
    ExperimentConfig c;
    const auto j = c.to_json();
    EXPECT_EQ(j.at("iters"), 1500);
    EXPECT_EQ(j.at("hidden_seed"), 11);
    EXPECT_EQ(j.at("optimizer").at("lr"), 1e-2);
}

} // namespace
} // namespace splatctl
