// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shared by the tiled forward renderer and the backward pass.

#include "splatctl/splat.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

namespace splatctl::detail {

/// Projected Gaussians in blend order, with per-pixel constants precomputed.
template <typename T> struct SplatTable {
    int channels = 0;
    std::vector<T> cx, cy, opacity, denom, cutoff2;
    std::vector<T> features;            // [sorted][channel]
    std::vector<double> sigma;          // pixel sigma, always 64-bit
    std::vector<std::size_t> source;    // index into EmbeddedGaussians

    std::size_t size() const { return cx.size(); }
};

/// Sorts by (depth, input index), the canonical blend order.
std::vector<ProjectedGaussian> depth_sorted(const EmbeddedGaussians &g, const Camera &cam);

template <typename T> SplatTable<T> make_table(const EmbeddedGaussians &g, const std::vector<ProjectedGaussian> &sorted) {
    SplatTable<T> t;
    t.channels = g.channels;
    const auto n = sorted.size();
    for (auto *v : {&t.cx, &t.cy, &t.opacity, &t.denom, &t.cutoff2}) {
        v->resize(n);
    }
    t.sigma.resize(n);
    t.source.resize(n);
    t.features.resize(n * g.channels);
    for (std::size_t k = 0; k < n; ++k) {
        const auto &p = sorted[k];
        const double s = p.pixel_radius_sigma;
        t.cx[k] = static_cast<T>(p.pixel_center.x());
        t.cy[k] = static_cast<T>(p.pixel_center.y());
        t.opacity[k] = static_cast<T>(g.opacities[p.index]);
        t.denom[k] = static_cast<T>(2.0 * s * s);
        t.cutoff2[k] = static_cast<T>(9.0 * s * s);
        t.sigma[k] = s;
        t.source[k] = p.index;
        for (int c = 0; c < g.channels; ++c) {
            t.features[k * g.channels + c] = static_cast<T>(g.features[p.index * g.channels + c]);
        }
    }
    return t;
}

/// Tile -> member list (indices into the sorted table), members kept in blend order.
struct TileBins {
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::uint32_t> offsets; // tiles + 1
    std::vector<std::uint32_t> members;

    int tile_count() const { return tiles_x * tiles_y; }
};

TileBins bin_tiles(const std::vector<ProjectedGaussian> &sorted, const Camera &cam, int tile_size);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index runs exactly once.
template <typename Fn> void parallel_for(int count, int threads, Fn &&fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
}

} // namespace splatctl::detail
