// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/container.hpp"

#include "splatctl/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace splatctl {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedContainer: return "MalformedContainer";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::CoefficientLengthMismatch: return "CoefficientLengthMismatch";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ChannelOutOfRange: return "ChannelOutOfRange";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

} // namespace splatctl

namespace splatctl::container {

namespace {

template <typename Word> void append_le(std::vector<std::uint8_t> &out, Word word) {
    for (std::size_t i = 0; i < sizeof(Word); ++i) {
        out.push_back(static_cast<std::uint8_t>((word >> (8 * i)) & 0xFFu));
    }
}

template <typename Word> Word load_le(const std::uint8_t *p) {
    Word word = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) {
        word |= static_cast<Word>(p[i]) << (8 * i);
    }
    return word;
}

constexpr std::size_t kLengthSize = 4;
// Headers are tiny; anything larger is corruption.
constexpr std::uint32_t kMaxHeaderBytes = 1u << 20;

} // namespace

Writer::Writer(std::string_view magic) : magic_(magic) {
    if (magic_.size() != kMagicSize) {
        throw Error(ErrorCode::InvalidArgument, "container magic must be 8 bytes");
    }
}

void Writer::put_f64(std::span<const double> values) {
    payload_.reserve(payload_.size() + values.size() * 8);
    for (double v : values) {
        append_le(payload_, std::bit_cast<std::uint64_t>(v));
    }
}

void Writer::put_f32(std::span<const float> values) {
    payload_.reserve(payload_.size() + values.size() * 4);
    for (float v : values) {
        append_le(payload_, std::bit_cast<std::uint32_t>(v));
    }
}

void Writer::put_u32(std::span<const std::uint32_t> values) {
    payload_.reserve(payload_.size() + values.size() * 4);
    for (auto v : values) {
        append_le(payload_, v);
    }
}

void Writer::put_i32(std::span<const std::int32_t> values) {
    payload_.reserve(payload_.size() + values.size() * 4);
    for (auto v : values) {
        append_le(payload_, std::bit_cast<std::uint32_t>(v));
    }
}

std::size_t Writer::payload_start(const Json &header) { return kMagicSize + kLengthSize + header.dump().size(); }

std::vector<std::uint8_t> Writer::bytes(const Json &header) const {
    const std::string text = header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(kMagicSize + kLengthSize + text.size() + payload_.size());
    out.insert(out.end(), magic_.begin(), magic_.end());
    append_le(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), payload_.begin(), payload_.end());
    return out;
}

void Writer::write(const Json &header, const std::filesystem::path &path) const {
    const auto data = bytes(header);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) {
        throw Error(ErrorCode::IoFailure, "short write to '" + path.string() + "'");
    }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(ErrorCode::MissingFile, "no such file '" + path.string() + "'");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingFile, "cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Reader::Reader(const std::filesystem::path &path, std::string_view magic)
    : bytes_(read_file_bytes(path)), source_(path.string()) {
    parse(magic);
}

Reader::Reader(std::vector<std::uint8_t> bytes, std::string_view magic, std::string source)
    : bytes_(std::move(bytes)), source_(std::move(source)) {
    parse(magic);
}

void Reader::parse(std::string_view magic) {
    if (bytes_.size() < kMagicSize ||
        std::memcmp(bytes_.data(), magic.data(), kMagicSize) != 0) {
        std::string found;
        for (std::size_t i = 0; i < std::min(bytes_.size(), kMagicSize); ++i) {
            const char c = static_cast<char>(bytes_[i]);
            found += (c >= 32 && c < 127) ? c : '?';
        }
        throw Error(ErrorCode::BadMagic,
                    "'" + source_ + "': expected magic '" + std::string(magic) + "', found '" + found + "'");
    }
    if (bytes_.size() < kMagicSize + kLengthSize) {
        throw Error(ErrorCode::HeaderMismatch, "'" + source_ + "': truncated before header length");
    }
    const auto header_len = load_le<std::uint32_t>(bytes_.data() + kMagicSize);
    if (header_len > kMaxHeaderBytes || header_len > bytes_.size() - kMagicSize - kLengthSize) {
        throw Error(ErrorCode::HeaderMismatch, "'" + source_ + "': header length " + std::to_string(header_len) +
                                                   " exceeds file size " + std::to_string(bytes_.size()));
    }
    const auto *begin = reinterpret_cast<const char *>(bytes_.data() + kMagicSize + kLengthSize);
    header_ = Json::parse(begin, begin + header_len, nullptr, /*allow_exceptions=*/false);
    if (header_.is_discarded() || !header_.is_object()) {
        throw Error(ErrorCode::HeaderMismatch, "'" + source_ + "': header is not a JSON object");
    }
    payload_offset_ = kMagicSize + kLengthSize + header_len;
    cursor_ = payload_offset_;
}

void Reader::expect_payload_size(std::size_t expected) const {
    if (payload_size() != expected) {
        throw Error(ErrorCode::HeaderMismatch, "'" + source_ + "': expected " + std::to_string(expected) +
                                                   " payload bytes, found " + std::to_string(payload_size()));
    }
}

const std::uint8_t *Reader::take(std::size_t count) {
    if (count > bytes_.size() - cursor_) {
        throw Error(ErrorCode::HeaderMismatch, "'" + source_ + "': payload ends " +
                                                   std::to_string(count - (bytes_.size() - cursor_)) +
                                                   " bytes early");
    }
    const auto *p = bytes_.data() + cursor_;
    cursor_ += count;
    return p;
}

std::vector<double> Reader::take_f64(std::size_t count) {
    const auto *p = take(checked_product({count, 8}, std::numeric_limits<std::size_t>::max(), "f64 block"));
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = std::bit_cast<double>(load_le<std::uint64_t>(p + 8 * i));
    }
    return out;
}

std::vector<float> Reader::take_f32(std::size_t count) {
    const auto *p = take(checked_product({count, 4}, std::numeric_limits<std::size_t>::max(), "f32 block"));
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = std::bit_cast<float>(load_le<std::uint32_t>(p + 4 * i));
    }
    return out;
}

std::vector<std::uint32_t> Reader::take_u32(std::size_t count) {
    const auto *p = take(checked_product({count, 4}, std::numeric_limits<std::size_t>::max(), "u32 block"));
    std::vector<std::uint32_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = load_le<std::uint32_t>(p + 4 * i);
    }
    return out;
}

std::vector<std::int32_t> Reader::take_i32(std::size_t count) {
    const auto raw = take_u32(count);
    std::vector<std::int32_t> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::bit_cast<std::int32_t>(raw[i]);
    }
    return out;
}

std::uint64_t header_count(const Json &header, const char *key, std::uint64_t max, const std::string &source) {
    const auto it = header.find(key);
    if (it == header.end() || !it->is_number_integer()) {
        throw Error(ErrorCode::HeaderMismatch, "'" + source + "': header field '" + key + "' missing or not an integer");
    }
    if (it->is_number_unsigned()) {
        const auto value = it->get<std::uint64_t>();
        if (value <= max) {
            return value;
        }
    }
    throw Error(ErrorCode::HeaderMismatch, "'" + source + "': header field '" + key + "' out of range");
}

std::uint64_t checked_product(std::initializer_list<std::uint64_t> factors, std::uint64_t limit,
                              const std::string &what) {
    std::uint64_t product = 1;
    for (auto f : factors) {
        if (f != 0 && product > limit / f) {
            throw Error(ErrorCode::HeaderMismatch, what + ": size overflows");
        }
        product *= f;
    }
    return product;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (auto b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string hex64(std::uint64_t value) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << value;
    return os.str();
}

} // namespace splatctl::container
