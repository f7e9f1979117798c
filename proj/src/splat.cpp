// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/splat.hpp"

#include "raster_internal.hpp"
#include "splatctl/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string_view>

namespace splatctl {

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
        throw Error(ErrorCode::InvalidArgument, "camera focal lengths must be positive");
    }
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::InvalidDimension, "camera width and height must be >= 1");
    }
    if (!(near > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "camera near plane must be positive");
    }
    if (!rotation.allFinite() || ((rotation.transpose() * rotation) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, "camera rotation is not orthonormal");
    }
    if (!translation.allFinite() || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw Error(ErrorCode::InvalidArgument, "camera has non-finite parameters");
    }
}

int resolve_thread_count(int requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char *env = std::getenv("GSPLAT_THREADS")) {
        int value = 0;
        const std::string_view text(env);
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec == std::errc() && ptr == text.data() + text.size() && value > 0) {
            return value;
        }
        spdlog::warn("ignoring GSPLAT_THREADS='{}'", env);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

void warn_if_anisotropic(const Camera &cam) {
    if (std::abs(cam.fx - cam.fy) / cam.fx > 0.05) {
        spdlog::warn("fx={} and fy={} differ by more than 5%; isotropic pixel footprints will be inaccurate", cam.fx,
                     cam.fy);
    }
}

} // namespace

std::vector<ProjectedGaussian> project(const EmbeddedGaussians &g, const Camera &cam) {
    std::vector<ProjectedGaussian> out;
    out.reserve(g.size());
    const double xmax = cam.width - 1;
    const double ymax = cam.height - 1;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 p = cam.to_camera(g.positions[i]);
        if (!(p.z() > cam.near)) {
            continue;
        }
        const double u = cam.fx * p.x() / p.z() + cam.cx;
        const double v = cam.fy * p.y() / p.z() + cam.cy;
        const double sigma = g.scales[i] * cam.fx / p.z();
        // Distance from the center to the image rectangle [0, W-1] x [0, H-1].
        const double du = u - std::clamp(u, 0.0, xmax);
        const double dv = v - std::clamp(v, 0.0, ymax);
        const double reach = kSupportSigmas * sigma;
        if (!(sigma > 0.0) || du * du + dv * dv > reach * reach) {
            continue;
        }
        out.push_back({Vec2(u, v), p.z(), sigma, i});
    }
    return out;
}

FeatureMap render_bruteforce(const EmbeddedGaussians &g, const Camera &cam) {
    cam.validate();
    warn_if_anisotropic(cam);
    auto splats = project(g, cam);
    std::stable_sort(splats.begin(), splats.end(), [](const ProjectedGaussian &a, const ProjectedGaussian &b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });

    const int channels = g.channels;
    FeatureMap map(cam.width, cam.height, channels);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
            double *out = map.values.data() + pix * channels;
            double transmittance = 1.0;
            for (const auto &s : splats) {
                const double dx = x - s.pixel_center.x();
                const double dy = y - s.pixel_center.y();
                const double d2 = dx * dx + dy * dy;
                const double sig = s.pixel_radius_sigma;
                if (d2 > 9.0 * sig * sig) {
                    continue;
                }
                const double alpha = std::min(g.opacities[s.index] * std::exp(-d2 / (2.0 * sig * sig)), kAlphaClamp);
                const double weight = alpha * transmittance;
                const double *f = g.features.data() + s.index * channels;
                for (int c = 0; c < channels; ++c) {
                    out[c] += f[c] * weight;
                }
                transmittance *= 1.0 - alpha;
                if (transmittance < kTransmittanceCutoff) {
                    break;
                }
            }
            map.alpha[pix] = 1.0 - transmittance;
        }
    }
    return map;
}

namespace detail {

std::vector<ProjectedGaussian> depth_sorted(const EmbeddedGaussians &g, const Camera &cam) {
    auto splats = project(g, cam);
    std::sort(splats.begin(), splats.end(), [](const ProjectedGaussian &a, const ProjectedGaussian &b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });
    return splats;
}

TileBins bin_tiles(const std::vector<ProjectedGaussian> &sorted, const Camera &cam, int tile_size) {
    TileBins bins;
    bins.tile_size = tile_size;
    bins.tiles_x = (cam.width + tile_size - 1) / tile_size;
    bins.tiles_y = (cam.height + tile_size - 1) / tile_size;
    const auto n_tiles = static_cast<std::size_t>(bins.tile_count());

    struct Range {
        int x0, x1, y0, y1;
    };
    std::vector<Range> ranges(sorted.size());
    std::vector<std::uint32_t> counts(n_tiles + 1, 0);
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const auto &s = sorted[k];
        // Slightly inflated so rounding never drops a pixel the exact d2 test would accept.
        const double r = kSupportSigmas * s.pixel_radius_sigma * (1.0 + 1e-12) + 1e-9;
        const int px0 = std::max(0, static_cast<int>(std::ceil(s.pixel_center.x() - r)));
        const int px1 = std::min(cam.width - 1, static_cast<int>(std::floor(s.pixel_center.x() + r)));
        const int py0 = std::max(0, static_cast<int>(std::ceil(s.pixel_center.y() - r)));
        const int py1 = std::min(cam.height - 1, static_cast<int>(std::floor(s.pixel_center.y() + r)));
        if (px0 > px1 || py0 > py1) {
            ranges[k] = {1, 0, 1, 0};
            continue;
        }
        ranges[k] = {px0 / tile_size, px1 / tile_size, py0 / tile_size, py1 / tile_size};
        for (int ty = ranges[k].y0; ty <= ranges[k].y1; ++ty) {
            for (int tx = ranges[k].x0; tx <= ranges[k].x1; ++tx) {
                ++counts[static_cast<std::size_t>(ty) * bins.tiles_x + tx + 1];
            }
        }
    }
    for (std::size_t t = 0; t < n_tiles; ++t) {
        counts[t + 1] += counts[t];
    }
    bins.offsets = counts;
    bins.members.resize(counts[n_tiles]);
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const auto &r = ranges[k];
        for (int ty = r.y0; ty <= r.y1; ++ty) {
            for (int tx = r.x0; tx <= r.x1; ++tx) {
                bins.members[cursor[static_cast<std::size_t>(ty) * bins.tiles_x + tx]++] =
                    static_cast<std::uint32_t>(k);
            }
        }
    }
    return bins;
}

} // namespace detail

namespace {

template <typename T>
void render_tile(const detail::SplatTable<T> &table, const detail::TileBins &bins, int tile, FeatureMap &map) {
    const int channels = table.channels;
    const int tx = tile % bins.tiles_x;
    const int ty = tile / bins.tiles_x;
    const int x0 = tx * bins.tile_size;
    const int y0 = ty * bins.tile_size;
    const int x1 = std::min(map.width, x0 + bins.tile_size);
    const int y1 = std::min(map.height, y0 + bins.tile_size);
    const std::uint32_t *begin = bins.members.data() + bins.offsets[tile];
    const std::uint32_t *end = bins.members.data() + bins.offsets[tile + 1];

    const T clamp = static_cast<T>(kAlphaClamp);
    const T cutoff = static_cast<T>(kTransmittanceCutoff);
    std::vector<T> acc(channels);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            std::fill(acc.begin(), acc.end(), T(0));
            T transmittance = 1;
            for (const std::uint32_t *it = begin; it != end; ++it) {
                const auto k = *it;
                const T dx = static_cast<T>(x) - table.cx[k];
                const T dy = static_cast<T>(y) - table.cy[k];
                const T d2 = dx * dx + dy * dy;
                if (d2 > table.cutoff2[k]) {
                    continue;
                }
                const T alpha = std::min(table.opacity[k] * std::exp(-d2 / table.denom[k]), clamp);
                const T weight = alpha * transmittance;
                const T *f = table.features.data() + static_cast<std::size_t>(k) * channels;
                for (int c = 0; c < channels; ++c) {
                    acc[c] += f[c] * weight;
                }
                transmittance *= T(1) - alpha;
                if (transmittance < cutoff) {
                    break;
                }
            }
            const std::size_t pix = static_cast<std::size_t>(y) * map.width + x;
            for (int c = 0; c < channels; ++c) {
                map.values[pix * channels + c] = static_cast<double>(acc[c]);
            }
            map.alpha[pix] = static_cast<double>(T(1) - transmittance);
        }
    }
}

template <typename T>
FeatureMap render_tiled_impl(const EmbeddedGaussians &g, const Camera &cam, const RenderOptions &options) {
    const auto sorted = detail::depth_sorted(g, cam);
    const auto table = detail::make_table<T>(g, sorted);
    const auto bins = detail::bin_tiles(sorted, cam, options.tile_size);
    FeatureMap map(cam.width, cam.height, g.channels);
    detail::parallel_for(bins.tile_count(), resolve_thread_count(options.threads),
                         [&](int tile) { render_tile(table, bins, tile, map); });
    return map;
}

} // namespace

FeatureMap render_tiled(const EmbeddedGaussians &g, const Camera &cam, const RenderOptions &options) {
    cam.validate();
    if (options.tile_size < 1) {
        throw Error(ErrorCode::InvalidArgument, "tile_size must be >= 1");
    }
    warn_if_anisotropic(cam);
    if (options.precision == Precision::Float32) {
        return render_tiled_impl<float>(g, cam, options);
    }
    return render_tiled_impl<double>(g, cam, options);
}

} // namespace splatctl
