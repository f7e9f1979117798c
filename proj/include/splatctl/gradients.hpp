// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatctl/splat.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace splatctl {

/// d(loss)/d(raw field parameter); same layout as GaussianFieldUV.
struct FieldGradient {
    int resolution = 0;
    int channels = 0;
    std::vector<double> d_raw_feature;
    std::vector<double> d_raw_opacity;
    std::vector<double> d_raw_scale;

    static FieldGradient zeros(const GaussianFieldUV &field);
};

/**
 * Backpropagates `upstream` (= dL/dFeatureMap values, H x W x C) to the raw texel
 * parameters of `field`. Positions receive no gradient. Alpha entries that hit
 * the 0.9999 clamp contribute nothing to opacity or scale.
 */
FieldGradient backward(const EmbeddedGaussians &g, const Camera &cam, std::span<const double> upstream,
                       const GaussianFieldUV &field, const RenderOptions &options = {});

enum class ParamKind { Feature, Opacity, Scale };
std::string to_string(ParamKind kind);

struct ParamRef {
    std::size_t texel = 0;
    ParamKind kind = ParamKind::Feature;
    int channel = 0;
};

struct GradCheckOptions {
    double tolerance = 1e-4;
    /// Parameters with max(|analytic|, |numeric|) at or below this are skipped as noise.
    double magnitude_floor = 1e-8;
    /// Above this many raw parameters a seeded subsample of this size is checked.
    std::size_t max_params = 10000;
    RenderOptions render{};
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    ParamRef worst_param{};
    std::size_t checked = 0;
    bool pass = true;

    nlohmann::json to_json() const;
};

/// Central-difference check of backward() for L = sum(upstream * FeatureMap), upstream ~ U(-1,1) from `seed`.
GradCheckReport grad_check(const GaussianFieldUV &field, const SurfaceModel &model, const UVMapping &mapping,
                           const SurfaceState &state, const Camera &cam, std::uint64_t seed, double h,
                           const GradCheckOptions &options = {});

} // namespace splatctl
