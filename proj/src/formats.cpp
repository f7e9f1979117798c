// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/formats.hpp"

#include "splatctl/container.hpp"
#include "splatctl/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace splatctl {

namespace {

constexpr char kFeatureMapMagic[] = "GSFM0001";
constexpr char kMappingMagic[] = "GSUV0001";
constexpr std::uint64_t kMaxSide = 1u << 16;

container::Writer feature_map_writer(const FeatureMap &map) {
    container::Writer writer(kFeatureMapMagic);
    const auto pixels = map.pixel_count();
    std::vector<float> plane(pixels);
    for (int c = 0; c < map.channels; ++c) {
        for (std::size_t p = 0; p < pixels; ++p) {
            plane[p] = static_cast<float>(map.values[p * map.channels + c]);
        }
        writer.put_f32(plane);
    }
    for (std::size_t p = 0; p < pixels; ++p) {
        plane[p] = static_cast<float>(map.alpha[p]);
    }
    writer.put_f32(plane);
    return writer;
}

container::Json feature_map_header(const FeatureMap &map) {
    return {{"width", map.width}, {"height", map.height}, {"channels", map.channels}};
}

FeatureMap parse_feature_map(container::Reader &reader) {
    const auto &h = reader.header();
    const auto w = container::header_count(h, "width", kMaxSide, reader.source());
    const auto ht = container::header_count(h, "height", kMaxSide, reader.source());
    const auto c = container::header_count(h, "channels", kMaxSide, reader.source());
    if (w == 0 || ht == 0 || c == 0) {
        throw Error(ErrorCode::HeaderMismatch, "'" + reader.source() + "': width, height and channels must be >= 1");
    }
    const auto bytes = container::checked_product({w, ht, c + 1, 4}, std::uint64_t{1} << 62, "feature map payload");
    reader.expect_payload_size(bytes);

    FeatureMap map(static_cast<int>(w), static_cast<int>(ht), static_cast<int>(c));
    const auto pixels = map.pixel_count();
    for (std::uint64_t ch = 0; ch < c; ++ch) {
        const auto plane = reader.take_f32(pixels);
        for (std::size_t p = 0; p < pixels; ++p) {
            map.values[p * c + ch] = plane[p];
        }
    }
    const auto alpha = reader.take_f32(pixels);
    std::copy(alpha.begin(), alpha.end(), map.alpha.begin());
    return map;
}

} // namespace

void write_feature_map(const FeatureMap &map, const std::filesystem::path &path) {
    feature_map_writer(map).write(feature_map_header(map), path);
}

std::vector<std::uint8_t> encode_feature_map(const FeatureMap &map) {
    return feature_map_writer(map).bytes(feature_map_header(map));
}

FeatureMap read_feature_map(const std::filesystem::path &path) {
    container::Reader reader(path, kFeatureMapMagic);
    return parse_feature_map(reader);
}

FeatureMap decode_feature_map(std::vector<std::uint8_t> bytes, const std::string &source) {
    container::Reader reader(std::move(bytes), kFeatureMapMagic, source);
    return parse_feature_map(reader);
}

void write_uv_mapping(const UVMapping &mapping, const std::filesystem::path &path) {
    container::Writer writer(kMappingMagic);
    std::vector<std::int32_t> faces;
    std::vector<double> bary;
    faces.reserve(mapping.entries.size());
    bary.reserve(mapping.entries.size() * 3);
    for (const auto &e : mapping.entries) {
        if (e) {
            faces.push_back(static_cast<std::int32_t>(e->face_id));
            bary.insert(bary.end(), e->barycentric.begin(), e->barycentric.end());
        } else {
            faces.push_back(-1);
            bary.insert(bary.end(), {0.0, 0.0, 0.0});
        }
    }
    writer.put_i32(faces);
    writer.put_f64(bary);
    writer.write({{"resolution", mapping.resolution}}, path);
}

UVMapping read_uv_mapping(const std::filesystem::path &path) {
    container::Reader reader(path, kMappingMagic);
    const auto res = container::header_count(reader.header(), "resolution", kMaxSide, reader.source());
    if (res == 0) {
        throw Error(ErrorCode::HeaderMismatch, "'" + reader.source() + "': resolution must be >= 1");
    }
    const auto texels = res * res;
    reader.expect_payload_size(container::checked_product({texels, 28}, std::uint64_t{1} << 62, "mapping payload"));
    const auto faces = reader.take_i32(texels);
    const auto bary = reader.take_f64(texels * 3);
    UVMapping mapping;
    mapping.resolution = static_cast<int>(res);
    mapping.entries.resize(texels);
    for (std::size_t t = 0; t < texels; ++t) {
        if (faces[t] < 0) {
            continue;
        }
        mapping.entries[t] = TexelBinding{static_cast<std::uint32_t>(faces[t]), {bary[3 * t], bary[3 * t + 1], bary[3 * t + 2]}};
    }
    return mapping;
}

std::uint8_t feature_to_gray(double value) {
    const double v = std::isnan(value) ? 0.0 : std::clamp(value, -1.0, 1.0);
    // std::round rounds half away from zero.
    return static_cast<std::uint8_t>(std::round((v + 1.0) / 2.0 * 255.0));
}

void export_channel_image(const FeatureMap &map, int channel, const std::filesystem::path &path) {
    if (channel < 0 || channel >= map.channels) {
        throw Error(ErrorCode::ChannelOutOfRange, "channel " + std::to_string(channel) + " not in [0, " +
                                                      std::to_string(map.channels) + ")");
    }
    std::vector<std::uint8_t> pixels(map.pixel_count());
    for (std::size_t p = 0; p < pixels.size(); ++p) {
        pixels[p] = feature_to_gray(map.values[p * map.channels + channel]);
    }

    std::unique_ptr<FILE, int (*)(FILE *)> file(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!file) {
        throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(ErrorCode::IoFailure, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::IoFailure, "libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(map.width), static_cast<png_uint_32>(map.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < map.height; ++y) {
        png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * map.width);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace splatctl
