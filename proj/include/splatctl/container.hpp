// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shared layout for every binary container:
//   8-byte ASCII magic | u32 LE header length | JSON header | little-endian payload

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splatctl::container {

using Json = nlohmann::json;

inline constexpr std::size_t kMagicSize = 8;

class Writer {
  public:
    explicit Writer(std::string_view magic);

    void put_f64(std::span<const double> values);
    void put_f32(std::span<const float> values);
    void put_u32(std::span<const std::uint32_t> values);
    void put_i32(std::span<const std::int32_t> values);

    std::size_t payload_size() const { return payload_.size(); }

    /// Absolute file offset the next payload byte will land at, given the header.
    static std::size_t payload_start(const Json &header);

    void write(const Json &header, const std::filesystem::path &path) const;
    std::vector<std::uint8_t> bytes(const Json &header) const;

  private:
    std::string magic_;
    std::vector<std::uint8_t> payload_;
};

class Reader {
  public:
    /// Throws MissingFile, BadMagic, or HeaderMismatch (truncated or unparsable header).
    Reader(const std::filesystem::path &path, std::string_view magic);
    Reader(std::vector<std::uint8_t> bytes, std::string_view magic, std::string source);

    const Json &header() const { return header_; }
    std::size_t payload_size() const { return bytes_.size() - payload_offset_; }
    std::size_t payload_offset() const { return payload_offset_; }

    /// Throws HeaderMismatch naming expected vs actual byte counts.
    void expect_payload_size(std::size_t expected) const;

    /// Reads sequentially from the payload cursor.
    std::vector<double> take_f64(std::size_t count);
    std::vector<float> take_f32(std::size_t count);
    std::vector<std::uint32_t> take_u32(std::size_t count);
    std::vector<std::int32_t> take_i32(std::size_t count);

    std::size_t cursor() const { return cursor_; }
    const std::string &source() const { return source_; }

  private:
    void parse(std::string_view magic);
    const std::uint8_t *take(std::size_t bytes);

    std::vector<std::uint8_t> bytes_;
    std::string source_;
    Json header_;
    std::size_t payload_offset_ = 0;
    std::size_t cursor_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);

/// Reads an unsigned integer header field, rejecting negatives, non-integers and values above `max`.
std::uint64_t header_count(const Json &header, const char *key, std::uint64_t max, const std::string &source);

/// Multiplies counts, throwing HeaderMismatch on overflow past `limit`.
std::uint64_t checked_product(std::initializer_list<std::uint64_t> factors, std::uint64_t limit,
                              const std::string &what);

/// FNV-1a 64-bit; used for golden-file fingerprints.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string hex64(std::uint64_t value);

} // namespace splatctl::container
