// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/field.hpp"

#include "splatctl/container.hpp"
#include "splatctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace splatctl {

namespace {
constexpr char kFieldMagic[] = "GSFD0001";
}

double sigmoid(double x) {
    // Split by sign so neither branch overflows exp().
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void GaussianFieldUV::validate() const {
    if (resolution < 1 || channels < 1) {
        throw Error(ErrorCode::InvalidDimension, "field resolution and channels must be >= 1");
    }
    const auto texels = texel_count();
    if (raw_feature.size() != texels * channels || raw_opacity.size() != texels || raw_scale.size() != texels) {
        throw Error(ErrorCode::ShapeMismatch, "field tensors do not match resolution " + std::to_string(resolution) +
                                                  " and channels " + std::to_string(channels));
    }
    const auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(raw_feature.begin(), raw_feature.end(), finite) ||
        !std::all_of(raw_opacity.begin(), raw_opacity.end(), finite) ||
        !std::all_of(raw_scale.begin(), raw_scale.end(), finite)) {
        throw Error(ErrorCode::InvalidArgument, "field contains non-finite values");
    }
}

GaussianFieldUV init_field(int resolution, int channels, std::uint64_t seed, double initial_scale) {
    if (resolution < 1) {
        throw Error(ErrorCode::InvalidDimension, "resolution must be >= 1");
    }
    if (channels < 1) {
        throw Error(ErrorCode::InvalidDimension, "channels must be >= 1");
    }
    if (!(initial_scale > 0.0) || !std::isfinite(initial_scale)) {
        throw Error(ErrorCode::InvalidArgument, "initial scale must be positive and finite");
    }
    GaussianFieldUV field;
    field.resolution = resolution;
    field.channels = channels;
    const auto texels = field.texel_count();
    field.raw_feature.resize(texels * channels);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    for (auto &x : field.raw_feature) {
        x = dist(rng);
    }
    field.raw_opacity.assign(texels, 0.0);
    field.raw_scale.assign(texels, std::log(initial_scale));
    return field;
}

double default_initial_scale(const SurfaceModel &model) { return 0.7 * median_edge_length(model); }

ActivatedTexel activate(const GaussianFieldUV &field, std::size_t texel) {
    ActivatedTexel out;
    out.feature.resize(field.channels);
    const double *raw = field.raw_feature.data() + texel * field.channels;
    for (int c = 0; c < field.channels; ++c) {
        out.feature[c] = std::tanh(raw[c]);
    }
    out.opacity = sigmoid(field.raw_opacity[texel]);
    out.scale = std::exp(field.raw_scale[texel]);
    return out;
}

EmbeddedGaussians embed(const GaussianFieldUV &field, const DeformedMesh &mesh, const UVMapping &mapping) {
    if (mapping.resolution != field.resolution) {
        throw Error(ErrorCode::ResolutionMismatch, "mapping resolution " + std::to_string(mapping.resolution) +
                                                       " != field resolution " + std::to_string(field.resolution));
    }
    EmbeddedGaussians g;
    g.channels = field.channels;
    const auto n = mapping.mapped_count();
    g.positions.reserve(n);
    g.scales.reserve(n);
    g.opacities.reserve(n);
    g.features.reserve(n * field.channels);
    g.source_texel.reserve(n);
    for (std::size_t t = 0; t < mapping.entries.size(); ++t) {
        const auto &entry = mapping.entries[t];
        if (!entry) {
            continue;
        }
        const auto attrs = activate(field, t);
        g.positions.push_back(surface_point(mesh, *entry));
        g.scales.push_back(attrs.scale);
        g.opacities.push_back(attrs.opacity);
        g.features.insert(g.features.end(), attrs.feature.begin(), attrs.feature.end());
        g.source_texel.push_back(static_cast<std::uint32_t>(t));
    }
    return g;
}

void save_field(const GaussianFieldUV &field, const std::filesystem::path &path) {
    field.validate();
    container::Writer writer(kFieldMagic);
    writer.put_f64(field.raw_feature);
    writer.put_f64(field.raw_opacity);
    writer.put_f64(field.raw_scale);
    writer.write({{"resolution", field.resolution}, {"channels", field.channels}}, path);
}

GaussianFieldUV load_field(const std::filesystem::path &path) {
    container::Reader reader(path, kFieldMagic);
    const auto res = container::header_count(reader.header(), "resolution", 1u << 16, reader.source());
    const auto ch = container::header_count(reader.header(), "channels", 1u << 16, reader.source());
    if (res == 0 || ch == 0) {
        throw Error(ErrorCode::HeaderMismatch, "'" + reader.source() + "': resolution and channels must be >= 1");
    }
    const auto texels = res * res;
    const auto bytes = container::checked_product({texels, ch + 2, 8}, std::uint64_t{1} << 62, "field payload");
    reader.expect_payload_size(bytes);

    GaussianFieldUV field;
    field.resolution = static_cast<int>(res);
    field.channels = static_cast<int>(ch);
    field.raw_feature = reader.take_f64(texels * ch);
    field.raw_opacity = reader.take_f64(texels);
    field.raw_scale = reader.take_f64(texels);
    try {
        field.validate();
    } catch (const Error &e) {
        throw Error(ErrorCode::HeaderMismatch, "'" + reader.source() + "': " + e.what());
    }
    return field;
}

} // namespace splatctl
