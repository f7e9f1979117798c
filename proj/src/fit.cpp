// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/fit.hpp"

#include "splatctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace splatctl {

OptimState OptimState::for_size(std::size_t n, double lr) {
    OptimState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.lr = lr;
    return s;
}

void opt_step(std::span<double> params, std::span<const double> grads, OptimState &state) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw Error(ErrorCode::ShapeMismatch, "optimizer: params " + std::to_string(params.size()) + ", grads " +
                                                  std::to_string(grads.size()) + ", moments " +
                                                  std::to_string(state.m.size()));
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

ProxyDecoder ProxyDecoder::zeros(int channels) {
    return {channels, std::vector<double>(static_cast<std::size_t>(3) * (channels + 1), 0.0)};
}

ProxyDecoder ProxyDecoder::random(int channels, std::uint64_t seed, double amplitude) {
    auto d = zeros(channels);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    for (auto &w : d.weights) {
        w = dist(rng);
    }
    return d;
}

std::vector<double> ProxyDecoder::decode(const FeatureMap &map) const {
    if (map.channels != channels) {
        throw Error(ErrorCode::ShapeMismatch, "decoder expects " + std::to_string(channels) + " channels, map has " +
                                                  std::to_string(map.channels));
    }
    const int stride = channels + 1;
    std::vector<double> rgb(map.pixel_count() * 3);
    for (std::size_t p = 0; p < map.pixel_count(); ++p) {
        const double *f = map.values.data() + p * channels;
        for (int o = 0; o < 3; ++o) {
            const double *w = weights.data() + o * stride;
            double acc = w[channels];
            for (int c = 0; c < channels; ++c) {
                acc += w[c] * f[c];
            }
            rgb[p * 3 + o] = acc;
        }
    }
    return rgb;
}

namespace {

std::vector<double> pack(const GaussianFieldUV &field) {
    std::vector<double> p;
    p.reserve(field.raw_feature.size() + 2 * field.texel_count());
    p.insert(p.end(), field.raw_feature.begin(), field.raw_feature.end());
    p.insert(p.end(), field.raw_opacity.begin(), field.raw_opacity.end());
    p.insert(p.end(), field.raw_scale.begin(), field.raw_scale.end());
    return p;
}

void unpack(std::span<const double> p, GaussianFieldUV &field) {
    const auto nf = field.raw_feature.size();
    const auto nt = field.texel_count();
    std::copy_n(p.begin(), nf, field.raw_feature.begin());
    std::copy_n(p.begin() + nf, nt, field.raw_opacity.begin());
    std::copy_n(p.begin() + nf + nt, nt, field.raw_scale.begin());
}

void accumulate(std::vector<double> &into, const FieldGradient &g) {
    std::size_t i = 0;
    for (const auto *part : {&g.d_raw_feature, &g.d_raw_opacity, &g.d_raw_scale}) {
        for (double x : *part) {
            into[i++] += x;
        }
    }
}

void require_finite(std::span<const double> values, const char *what, int iter) {
    if (!std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); })) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(what) + " became non-finite at iteration " + std::to_string(iter));
    }
}

std::vector<DeformedMesh> deform_all(const SurfaceModel &model, const std::vector<TrainingView> &views) {
    std::vector<DeformedMesh> meshes;
    meshes.reserve(views.size());
    for (const auto &v : views) {
        meshes.push_back(deform(model, v.state));
    }
    return meshes;
}

} // namespace

double feature_mse(const FeatureMap &a, const FeatureMap &b) {
    if (a.values.size() != b.values.size()) {
        throw Error(ErrorCode::ShapeMismatch, "feature maps differ in size");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return a.values.empty() ? 0.0 : acc / static_cast<double>(a.values.size());
}

double channel_variance(const FeatureMap &map) {
    const auto n = static_cast<double>(map.pixel_count());
    if (map.channels == 0 || n == 0) {
        return 0.0;
    }
    double total = 0.0;
    for (int c = 0; c < map.channels; ++c) {
        double mean = 0.0;
        for (std::size_t p = 0; p < map.pixel_count(); ++p) {
            mean += map.values[p * map.channels + c];
        }
        mean /= n;
        double var = 0.0;
        for (std::size_t p = 0; p < map.pixel_count(); ++p) {
            const double d = map.values[p * map.channels + c] - mean;
            var += d * d;
        }
        total += var / n;
    }
    return total / map.channels;
}

FitResult fit_direct(GaussianFieldUV field, const SurfaceModel &model, const UVMapping &mapping,
                     const std::vector<TrainingView> &views, const std::vector<FeatureMap> &targets,
                     const FitOptions &options) {
    field.validate();
    if (views.size() != targets.size() || views.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "need one target per view and at least one view");
    }
    for (std::size_t k = 0; k < views.size(); ++k) {
        const auto &cam = views[k].camera;
        if (targets[k].width != cam.width || targets[k].height != cam.height || targets[k].channels != field.channels) {
            throw Error(ErrorCode::ShapeMismatch, "target " + std::to_string(k) + " does not match its camera");
        }
    }
    const auto meshes = deform_all(model, views);
    auto params = pack(field);
    auto state = OptimState::for_size(params.size(), options.lr);
    const double n_views = static_cast<double>(views.size());

    FitResult result;
    result.loss_trace.reserve(options.iters);
    std::vector<double> grads(params.size());
    std::vector<double> upstream;
    for (int it = 0; it < options.iters; ++it) {
        std::fill(grads.begin(), grads.end(), 0.0);
        double loss = 0.0;
        for (std::size_t k = 0; k < views.size(); ++k) {
            const auto g = embed(field, meshes[k], mapping);
            const auto map = render_tiled(g, views[k].camera, options.render);
            const auto &target = targets[k];
            const double count = static_cast<double>(map.values.size());
            upstream.resize(map.values.size());
            double sq = 0.0;
            for (std::size_t i = 0; i < map.values.size(); ++i) {
                const double d = map.values[i] - target.values[i];
                sq += d * d;
                upstream[i] = 2.0 * d / (count * n_views);
            }
            loss += sq / count / n_views;
            accumulate(grads, backward(g, views[k].camera, upstream, field, options.render));
        }
        result.loss_trace.push_back(loss);
        require_finite(std::span<const double>(&loss, 1), "loss", it);
        opt_step(params, grads, state);
        require_finite(params, "field parameters", it);
        unpack(params, field);
    }
    result.field = std::move(field);
    return result;
}

FitResult fit_proxy(GaussianFieldUV field, ProxyDecoder decoder, const SurfaceModel &model, const UVMapping &mapping,
                    const std::vector<TrainingView> &views, const std::vector<std::vector<double>> &targets,
                    const FitOptions &options) {
    field.validate();
    if (decoder.channels != field.channels ||
        decoder.weights.size() != static_cast<std::size_t>(3) * (field.channels + 1)) {
        throw Error(ErrorCode::ShapeMismatch, "decoder channel count does not match the field");
    }
    if (views.size() != targets.size() || views.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "need one target per view and at least one view");
    }
    for (std::size_t k = 0; k < views.size(); ++k) {
        const auto &cam = views[k].camera;
        if (targets[k].size() != static_cast<std::size_t>(cam.width) * cam.height * 3) {
            throw Error(ErrorCode::ShapeMismatch, "RGB target " + std::to_string(k) + " does not match its camera");
        }
    }
    const auto meshes = deform_all(model, views);
    const int channels = field.channels;
    const int stride = channels + 1;
    auto params = pack(field);
    auto field_state = OptimState::for_size(params.size(), options.lr);
    auto decoder_state = OptimState::for_size(decoder.weights.size(), options.lr);
    const double n_views = static_cast<double>(views.size());

    FitResult result;
    result.loss_trace.reserve(options.iters);
    std::vector<double> grads(params.size());
    std::vector<double> decoder_grads(decoder.weights.size());
    std::vector<double> upstream;
    for (int it = 0; it < options.iters; ++it) {
        std::fill(grads.begin(), grads.end(), 0.0);
        std::fill(decoder_grads.begin(), decoder_grads.end(), 0.0);
        double loss = 0.0;
        for (std::size_t k = 0; k < views.size(); ++k) {
            const auto g = embed(field, meshes[k], mapping);
            const auto map = render_tiled(g, views[k].camera, options.render);
            const auto rgb = decoder.decode(map);
            const auto &target = targets[k];
            const double count = static_cast<double>(rgb.size());
            upstream.assign(map.values.size(), 0.0);
            double sq = 0.0;
            for (std::size_t p = 0; p < map.pixel_count(); ++p) {
                const double *f = map.values.data() + p * channels;
                double *up = upstream.data() + p * channels;
                for (int o = 0; o < 3; ++o) {
                    const double d = rgb[p * 3 + o] - target[p * 3 + o];
                    sq += d * d;
                    const double d_out = 2.0 * d / (count * n_views);
                    double *dw = decoder_grads.data() + o * stride;
                    const double *w = decoder.weights.data() + o * stride;
                    for (int c = 0; c < channels; ++c) {
                        dw[c] += d_out * f[c];
                        up[c] += d_out * w[c];
                    }
                    dw[channels] += d_out;
                }
            }
            loss += sq / count / n_views;
            accumulate(grads, backward(g, views[k].camera, upstream, field, options.render));
        }
        result.loss_trace.push_back(loss);
        require_finite(std::span<const double>(&loss, 1), "loss", it);
        opt_step(params, grads, field_state);
        opt_step(decoder.weights, decoder_grads, decoder_state);
        require_finite(params, "field parameters", it);
        require_finite(decoder.weights, "decoder weights", it);
        unpack(params, field);
    }
    result.field = std::move(field);
    result.decoder = std::move(decoder);
    return result;
}

// ---------------------------------------------------------------------------

GaussianFieldUV plant_field(int resolution, int channels, std::uint64_t seed, double initial_scale) {
    auto field = init_field(resolution, channels, seed, initial_scale);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> feature(-1.5, 1.5);
    std::uniform_real_distribution<double> opacity(-0.5, 1.5);
    std::uniform_real_distribution<double> scale(-0.2, 0.2);
    for (auto &x : field.raw_feature) {
        x = feature(rng);
    }
    for (auto &x : field.raw_opacity) {
        x = opacity(rng);
    }
    for (auto &x : field.raw_scale) {
        x += scale(rng);
    }
    return field;
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"resolution", resolution},     {"channels", channels},         {"image_size", image_size},
            {"n_views", n_views},           {"iters", iters},               {"hidden_seed", hidden_seed},
            {"init_seed", init_seed},       {"view_seed", view_seed},       {"decoder_seed", decoder_seed},
            {"optimizer", {{"lr", lr}, {"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}}},
            {"tile_size", render.tile_size}};
}

namespace {

std::vector<TrainingView> experiment_views(const SurfaceModel &model, const ExperimentConfig &config, int n,
                                           std::uint64_t seed) {
    std::vector<TrainingView> views;
    const auto sampled = sample_views(n, kDefaultYawRange, kDefaultPitchRange, 3.2, seed,
                                      Intrinsics::for_size(config.image_size, config.image_size));
    for (const auto &s : sampled) {
        views.push_back({s.camera, SurfaceState::neutral(model)});
    }
    return views;
}

std::vector<double> fixed_color_map(int channels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(3) * (channels + 1));
    for (auto &x : w) {
        x = dist(rng);
    }
    return w;
}

} // namespace

DirectExperiment run_direct_experiment(const SurfaceModel &model, const ExperimentConfig &config) {
    const double s0 = default_initial_scale(model);
    const auto mapping = build_uv_mapping(model, config.resolution);
    const auto hidden = plant_field(config.resolution, config.channels, config.hidden_seed, s0);

    DirectExperiment out;
    out.views = experiment_views(model, config, config.n_views, config.view_seed);
    std::vector<FeatureMap> targets;
    for (const auto &v : out.views) {
        targets.push_back(render_tiled(embed(hidden, deform(model, v.state), mapping), v.camera, config.render));
    }
    FitOptions options{config.iters, config.lr, config.render};
    out.fit = fit_direct(init_field(config.resolution, config.channels, config.init_seed, s0), model, mapping,
                         out.views, targets, options);

    // Held-out views come from a disjoint seed.
    const auto heldout = experiment_views(model, config, 8, config.view_seed + 1000);
    double loss = 0.0;
    for (const auto &v : heldout) {
        const auto mesh = deform(model, v.state);
        const auto truth = render_tiled(embed(hidden, mesh, mapping), v.camera, config.render);
        const auto fitted = render_tiled(embed(out.fit.field, mesh, mapping), v.camera, config.render);
        loss += feature_mse(fitted, truth);
    }
    out.heldout_loss = loss / static_cast<double>(heldout.size());
    return out;
}

ProxyExperiment run_proxy_experiment(const SurfaceModel &model, const ExperimentConfig &config) {
    const double s0 = default_initial_scale(model);
    const auto mapping = build_uv_mapping(model, config.resolution);
    const auto hidden = plant_field(config.resolution, config.channels, config.hidden_seed, s0);
    ProxyDecoder color{config.channels, fixed_color_map(config.channels, config.hidden_seed + 7)};

    std::vector<double> psi_alt(model.n_expr, 0.0);
    if (!psi_alt.empty()) {
        psi_alt[0] = 2.0;
    }
    if (psi_alt.size() > 1) {
        psi_alt[1] = 1.5;
    }

    ProxyExperiment out;
    out.views = experiment_views(model, config, config.n_views, config.view_seed);
    for (std::size_t k = 1; k < out.views.size(); k += 2) {
        out.views[k].state.psi = psi_alt;
    }
    std::vector<std::vector<double>> targets;
    for (const auto &v : out.views) {
        targets.push_back(color.decode(render_tiled(embed(hidden, deform(model, v.state), mapping), v.camera, config.render)));
    }

    auto initial = init_field(config.resolution, config.channels, config.init_seed, s0);
    for (const auto &v : out.views) {
        out.initial_variance +=
            channel_variance(render_tiled(embed(initial, deform(model, v.state), mapping), v.camera, config.render));
    }
    out.initial_variance /= static_cast<double>(out.views.size());

    FitOptions options{config.iters, config.lr, config.render};
    out.fit = fit_proxy(std::move(initial), ProxyDecoder::random(config.channels, config.decoder_seed, 0.1), model,
                        mapping, out.views, targets, options);

    for (const auto &v : out.views) {
        out.final_variance +=
            channel_variance(render_tiled(embed(out.fit.field, deform(model, v.state), mapping), v.camera, config.render));
    }
    out.final_variance /= static_cast<double>(out.views.size());

    const auto &cam = out.views.front().camera;
    auto neutral = SurfaceState::neutral(model);
    auto open = neutral;
    open.psi = psi_alt;
    const auto a = render_tiled(embed(out.fit.field, deform(model, neutral), mapping), cam, config.render);
    const auto b = render_tiled(embed(out.fit.field, deform(model, open), mapping), cam, config.render);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        out.expression_max_diff = std::max(out.expression_max_diff, std::abs(a.values[i] - b.values[i]));
    }
    return out;
}

} // namespace splatctl
