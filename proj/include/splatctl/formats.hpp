// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatctl/splat.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatctl {

/// GSFM0001: float32 planes, channel-major (C planes of H x W), then the alpha plane.
void write_feature_map(const FeatureMap &map, const std::filesystem::path &path);
FeatureMap read_feature_map(const std::filesystem::path &path);
std::vector<std::uint8_t> encode_feature_map(const FeatureMap &map);
FeatureMap decode_feature_map(std::vector<std::uint8_t> bytes, const std::string &source = "<memory>");

/// GSUV0001 cache of a UVMapping: per texel an i32 face id (-1 = unmapped) and three f64 barycentrics.
void write_uv_mapping(const UVMapping &mapping, const std::filesystem::path &path);
UVMapping read_uv_mapping(const std::filesystem::path &path);

/// v -> round_half_away_from_zero((clamp(v, -1, 1) + 1) / 2 * 255)
std::uint8_t feature_to_gray(double value);

/// Writes one channel as an 8-bit grayscale PNG.
void export_channel_image(const FeatureMap &map, int channel, const std::filesystem::path &path);

} // namespace splatctl
