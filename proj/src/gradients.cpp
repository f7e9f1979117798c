// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/gradients.hpp"

#include "raster_internal.hpp"
#include "splatctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace splatctl {

FieldGradient FieldGradient::zeros(const GaussianFieldUV &field) {
    FieldGradient grad;
    grad.resolution = field.resolution;
    grad.channels = field.channels;
    grad.d_raw_feature.assign(field.raw_feature.size(), 0.0);
    grad.d_raw_opacity.assign(field.raw_opacity.size(), 0.0);
    grad.d_raw_scale.assign(field.raw_scale.size(), 0.0);
    return grad;
}

std::string to_string(ParamKind kind) {
    switch (kind) {
    case ParamKind::Feature: return "feature";
    case ParamKind::Opacity: return "opacity";
    case ParamKind::Scale: return "scale";
    }
    return "unknown";
}

namespace {

// Per-tile gradient slots, one row of (C features, opacity, sigma) per tile member.
void backward_tile(const detail::SplatTable<double> &table, const detail::TileBins &bins, int tile, int width,
                   int height, std::span<const double> upstream, std::vector<double> &slots) {
    const int channels = table.channels;
    const int stride = channels + 2;
    const int tx = tile % bins.tiles_x;
    const int ty = tile / bins.tiles_x;
    const int x0 = tx * bins.tile_size;
    const int y0 = ty * bins.tile_size;
    const int x1 = std::min(width, x0 + bins.tile_size);
    const int y1 = std::min(height, y0 + bins.tile_size);
    const std::uint32_t *members = bins.members.data() + bins.offsets[tile];
    const auto count = static_cast<std::ptrdiff_t>(bins.offsets[tile + 1] - bins.offsets[tile]);
    slots.assign(static_cast<std::size_t>(count) * stride, 0.0);
    std::vector<double> behind(channels);

    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * width + x;
            const double *grad_out = upstream.data() + pix * channels;

            // Forward: final transmittance and the last member that blended.
            double transmittance = 1.0;
            std::ptrdiff_t last = -1;
            for (std::ptrdiff_t j = 0; j < count; ++j) {
                const auto k = members[j];
                const double dx = x - table.cx[k];
                const double dy = y - table.cy[k];
                const double d2 = dx * dx + dy * dy;
                if (d2 > table.cutoff2[k]) {
                    continue;
                }
                const double alpha = std::min(table.opacity[k] * std::exp(-d2 / table.denom[k]), kAlphaClamp);
                transmittance *= 1.0 - alpha;
                last = j;
                if (transmittance < kTransmittanceCutoff) {
                    break;
                }
            }

            // Backward: walk back-to-front recovering the transmittance in front of each member.
            std::fill(behind.begin(), behind.end(), 0.0);
            for (std::ptrdiff_t j = last; j >= 0; --j) {
                const auto k = members[j];
                const double dx = x - table.cx[k];
                const double dy = y - table.cy[k];
                const double d2 = dx * dx + dy * dy;
                if (d2 > table.cutoff2[k]) {
                    continue;
                }
                const double gauss = std::exp(-d2 / table.denom[k]);
                const double raw_alpha = table.opacity[k] * gauss;
                const bool clamped = raw_alpha > kAlphaClamp;
                const double alpha = clamped ? kAlphaClamp : raw_alpha;
                const double one_minus = 1.0 - alpha;
                transmittance /= one_minus;
                const double weight = alpha * transmittance;
                const double *f = table.features.data() + static_cast<std::size_t>(k) * channels;
                double *slot = slots.data() + static_cast<std::size_t>(j) * stride;

                double d_alpha = 0.0;
                for (int c = 0; c < channels; ++c) {
                    slot[c] += grad_out[c] * weight;
                    d_alpha += grad_out[c] * (f[c] * transmittance - behind[c] / one_minus);
                    behind[c] += f[c] * weight;
                }
                if (!clamped) {
                    const double sigma = table.sigma[k];
                    slot[channels] += d_alpha * gauss;                                      // d alpha / d opacity
                    slot[channels + 1] += d_alpha * alpha * d2 / (sigma * sigma * sigma); // d alpha / d sigma
                }
            }
        }
    }
}

} // namespace

FieldGradient backward(const EmbeddedGaussians &g, const Camera &cam, std::span<const double> upstream,
                       const GaussianFieldUV &field, const RenderOptions &options) {
    cam.validate();
    const int channels = g.channels;
    if (channels != field.channels) {
        throw Error(ErrorCode::ShapeMismatch, "gaussians carry " + std::to_string(channels) +
                                                  " channels, field has " + std::to_string(field.channels));
    }
    const std::size_t expected = static_cast<std::size_t>(cam.width) * cam.height * channels;
    if (upstream.size() != expected) {
        throw Error(ErrorCode::ShapeMismatch, "upstream has " + std::to_string(upstream.size()) +
                                                  " entries, expected " + std::to_string(expected));
    }
    if (options.tile_size < 1) {
        throw Error(ErrorCode::InvalidArgument, "tile_size must be >= 1");
    }
    for (auto t : g.source_texel) {
        if (t >= field.texel_count()) {
            throw Error(ErrorCode::ShapeMismatch, "gaussian source texel " + std::to_string(t) + " outside field");
        }
    }

    const auto sorted = detail::depth_sorted(g, cam);
    const auto table = detail::make_table<double>(g, sorted);
    const auto bins = detail::bin_tiles(sorted, cam, options.tile_size);
    const int stride = channels + 2;

    std::vector<std::vector<double>> tile_slots(static_cast<std::size_t>(bins.tile_count()));
    detail::parallel_for(bins.tile_count(), resolve_thread_count(options.threads), [&](int tile) {
        backward_tile(table, bins, tile, cam.width, cam.height, upstream, tile_slots[tile]);
    });

    // Fixed tile order keeps the reduction independent of thread scheduling.
    std::vector<double> per_splat(table.size() * stride, 0.0);
    for (int tile = 0; tile < bins.tile_count(); ++tile) {
        const auto &slots = tile_slots[tile];
        for (std::uint32_t j = 0; j < bins.offsets[tile + 1] - bins.offsets[tile]; ++j) {
            const auto k = bins.members[bins.offsets[tile] + j];
            for (int q = 0; q < stride; ++q) {
                per_splat[static_cast<std::size_t>(k) * stride + q] += slots[static_cast<std::size_t>(j) * stride + q];
            }
        }
    }

    auto grad = FieldGradient::zeros(field);
    for (std::size_t k = 0; k < table.size(); ++k) {
        const auto src = table.source[k];
        const auto texel = g.source_texel[src];
        const double *slot = per_splat.data() + k * stride;
        for (int c = 0; c < channels; ++c) {
            const double f = g.features[src * channels + c];
            grad.d_raw_feature[texel * channels + c] += slot[c] * (1.0 - f * f);
        }
        const double o = g.opacities[src];
        grad.d_raw_opacity[texel] += slot[channels] * o * (1.0 - o);
        // sigma_px = exp(raw_scale) * fx / z, so d sigma / d raw_scale = sigma_px.
        grad.d_raw_scale[texel] += slot[channels + 1] * table.sigma[k];
    }
    return grad;
}

nlohmann::json GradCheckReport::to_json() const {
    nlohmann::json worst = {{"texel", worst_param.texel}, {"kind", to_string(worst_param.kind)}};
    if (worst_param.kind == ParamKind::Feature) {
        worst["channel"] = worst_param.channel;
    }
    return {{"max_rel_err", max_rel_err}, {"worst_param", worst}, {"checked", checked}, {"pass", pass}};
}

GradCheckReport grad_check(const GaussianFieldUV &field, const SurfaceModel &model, const UVMapping &mapping,
                           const SurfaceState &state, const Camera &cam, std::uint64_t seed, double h,
                           const GradCheckOptions &options) {
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw Error(ErrorCode::InvalidArgument, "finite-difference step h must be positive");
    }
    field.validate();
    const auto mesh = deform(model, state);
    const auto base = embed(field, mesh, mapping);
    const int channels = field.channels;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> upstream(static_cast<std::size_t>(cam.width) * cam.height * channels);
    for (auto &u : upstream) {
        u = unit(rng);
    }
    const auto analytic = backward(base, cam, upstream, field, options.render);

    std::vector<std::ptrdiff_t> gaussian_of(field.texel_count(), -1);
    for (std::size_t i = 0; i < base.size(); ++i) {
        gaussian_of[base.source_texel[i]] = static_cast<std::ptrdiff_t>(i);
    }

    const std::size_t per_texel = static_cast<std::size_t>(channels) + 2;
    const std::size_t total = field.texel_count() * per_texel;
    std::vector<std::size_t> params(total);
    std::iota(params.begin(), params.end(), std::size_t{0});
    if (total > options.max_params) {
        std::shuffle(params.begin(), params.end(), rng);
        params.resize(options.max_params);
        std::sort(params.begin(), params.end());
    }

    auto decode = [&](std::size_t id) {
        ParamRef ref;
        ref.texel = id / per_texel;
        const auto slot = static_cast<int>(id % per_texel);
        if (slot < channels) {
            ref.kind = ParamKind::Feature;
            ref.channel = slot;
        } else {
            ref.kind = slot == channels ? ParamKind::Opacity : ParamKind::Scale;
        }
        return ref;
    };
    auto analytic_value = [&](const ParamRef &ref) {
        switch (ref.kind) {
        case ParamKind::Feature: return analytic.d_raw_feature[ref.texel * channels + ref.channel];
        case ParamKind::Opacity: return analytic.d_raw_opacity[ref.texel];
        case ParamKind::Scale: return analytic.d_raw_scale[ref.texel];
        }
        return 0.0;
    };

    GradCheckReport report;
    GaussianFieldUV probe = field;
    EmbeddedGaussians shifted = base;
    auto render_with = [&](const ParamRef &ref, double delta) {
        double *raw = nullptr;
        switch (ref.kind) {
        case ParamKind::Feature: raw = &probe.raw_feature[ref.texel * channels + ref.channel]; break;
        case ParamKind::Opacity: raw = &probe.raw_opacity[ref.texel]; break;
        case ParamKind::Scale: raw = &probe.raw_scale[ref.texel]; break;
        }
        const double saved = *raw;
        *raw = saved + delta;
        // Only the perturbed texel's Gaussian changes, so re-activate just that one.
        const auto i = static_cast<std::size_t>(gaussian_of[ref.texel]);
        const auto attrs = activate(probe, ref.texel);
        shifted.scales[i] = attrs.scale;
        shifted.opacities[i] = attrs.opacity;
        std::copy(attrs.feature.begin(), attrs.feature.end(), shifted.features.begin() + i * channels);
        auto map = render_tiled(shifted, cam, options.render);
        *raw = saved;
        const auto restored = activate(probe, ref.texel);
        shifted.scales[i] = restored.scale;
        shifted.opacities[i] = restored.opacity;
        std::copy(restored.feature.begin(), restored.feature.end(), shifted.features.begin() + i * channels);
        return map;
    };

    for (const auto id : params) {
        const auto ref = decode(id);
        const double a = analytic_value(ref);
        double numeric = 0.0;
        if (gaussian_of[ref.texel] >= 0) {
            const auto plus = render_with(ref, h);
            const auto minus = render_with(ref, -h);
            // Differencing per pixel first cancels every pixel the perturbation did not touch exactly.
            double diff = 0.0;
            for (std::size_t q = 0; q < upstream.size(); ++q) {
                diff += upstream[q] * (plus.values[q] - minus.values[q]);
            }
            numeric = diff / (2.0 * h);
        }
        ++report.checked;
        const double scale = std::max(std::abs(a), std::abs(numeric));
        if (!std::isfinite(a) || !std::isfinite(numeric)) {
            report.max_rel_err = std::numeric_limits<double>::infinity();
            report.worst_param = ref;
            continue;
        }
        if (scale <= options.magnitude_floor) {
            continue;
        }
        const double rel = std::abs(a - numeric) / scale;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_param = ref;
        }
    }
    report.pass = report.max_rel_err < options.tolerance;
    return report;
}

} // namespace splatctl
