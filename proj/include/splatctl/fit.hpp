// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatctl/gradients.hpp"
#include "splatctl/views.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace splatctl {

/// Adaptive first/second-moment optimizer state (bias-corrected).
struct OptimState {
    std::size_t step_count = 0;
    std::vector<double> m;
    std::vector<double> v;
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimState for_size(std::size_t n, double lr = 1e-2);
};

/// One in-place update. Throws ShapeMismatch if params, grads and moments disagree in size.
void opt_step(std::span<double> params, std::span<const double> grads, OptimState &state);

/// Per-pixel linear map from (feature, 1) to RGB. Weights are row-major [3][channels + 1].
struct ProxyDecoder {
    int channels = 0;
    std::vector<double> weights;

    static ProxyDecoder zeros(int channels);
    static ProxyDecoder random(int channels, std::uint64_t seed, double amplitude);

    /// H x W x 3 image from a feature map.
    std::vector<double> decode(const FeatureMap &map) const;
};

/// A camera plus the surface instance it observes.
struct TrainingView {
    Camera camera;
    SurfaceState state;
};

struct FitOptions {
    int iters = 1500;
    double lr = 1e-2;
    RenderOptions render{};
};

struct FitResult {
    std::vector<double> loss_trace; ///< loss before each update
    GaussianFieldUV field;
    ProxyDecoder decoder; ///< only set by fit_proxy
};

/// Mean over views of the per-value mean squared error between rendered and target maps.
FitResult fit_direct(GaussianFieldUV field, const SurfaceModel &model, const UVMapping &mapping,
                     const std::vector<TrainingView> &views, const std::vector<FeatureMap> &targets,
                     const FitOptions &options);

/// Jointly fits field and decoder against RGB targets (H x W x 3 per view); no loss touches the feature map.
FitResult fit_proxy(GaussianFieldUV field, ProxyDecoder decoder, const SurfaceModel &model, const UVMapping &mapping,
                    const std::vector<TrainingView> &views, const std::vector<std::vector<double>> &targets,
                    const FitOptions &options);

double feature_mse(const FeatureMap &a, const FeatureMap &b);

/// Mean over channels of the per-channel variance across pixels.
double channel_variance(const FeatureMap &map);

// ---------------------------------------------------------------------------
// Desk-scale experiments

/// A hidden field with strong features (raw U(-1.5, 1.5)) and varied opacity/scale.
GaussianFieldUV plant_field(int resolution, int channels, std::uint64_t seed, double initial_scale);

struct ExperimentConfig {
    int resolution = 32;
    int channels = 8;
    int image_size = 64;
    int n_views = 8;
    int iters = 1500;
    double lr = 1e-2;
    std::uint64_t hidden_seed = 11;
    std::uint64_t init_seed = 23;
    std::uint64_t view_seed = 5;
    std::uint64_t decoder_seed = 31;
    RenderOptions render{};

    nlohmann::json to_json() const;
};

struct DirectExperiment {
    FitResult fit;
    std::vector<TrainingView> views;
    double heldout_loss = 0.0; ///< on views disjoint from training
};

DirectExperiment run_direct_experiment(const SurfaceModel &model, const ExperimentConfig &config);

struct ProxyExperiment {
    FitResult fit;
    std::vector<TrainingView> views;
    double initial_variance = 0.0; ///< channel variance of the initial field's renders, averaged over views
    double final_variance = 0.0;
    /// max |F(psi_1) - F(psi_2)| for the learned field seen from one camera.
    double expression_max_diff = 0.0;
};

/// Targets are a fixed linear map of the hidden field's renders; half the views use a second expression.
ProxyExperiment run_proxy_experiment(const SurfaceModel &model, const ExperimentConfig &config);

} // namespace splatctl
