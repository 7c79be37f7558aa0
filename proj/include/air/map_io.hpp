#pragma once

// AIRM binary map files: "AIRMAP01", u32 rows, u32 cols (little-endian),
// then rows*cols float32 values row-major.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "air/attention.hpp"
#include "air/error.hpp"

namespace air {

inline constexpr char kAirmMagic[8] = {'A', 'I', 'R', 'M', 'A', 'P', '0', '1'};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v)
{
    const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline std::uint32_t get_u32(std::istream& in)
{
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw Error(ErrorKind::SchemaViolation, "truncated AIRM header");
    }
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

} // namespace detail

inline void write_airm(std::ostream& out, const AttentionMap& map)
{
    out.write(kAirmMagic, sizeof kAirmMagic);
    detail::put_u32(out, static_cast<std::uint32_t>(map.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(map.cols()));
    std::vector<unsigned char> buffer(map.size() * 4);
    for (std::size_t i = 0; i < map.size(); ++i) {
        const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(map.values()[i]));
        buffer[4 * i + 0] = static_cast<unsigned char>(bits);
        buffer[4 * i + 1] = static_cast<unsigned char>(bits >> 8);
        buffer[4 * i + 2] = static_cast<unsigned char>(bits >> 16);
        buffer[4 * i + 3] = static_cast<unsigned char>(bits >> 24);
    }
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
}

/// Reads an AIRM map. The file carries no frame, so the map is registered to
/// `frame` when given, otherwise to a frame of its own grid size.
inline AttentionMap read_airm(std::istream& in, std::optional<Frame> frame = std::nullopt)
{
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kAirmMagic, 8) != 0) {
        throw Error(ErrorKind::SchemaViolation, "not an AIRM map (bad magic)");
    }
    const std::uint32_t rows = detail::get_u32(in);
    const std::uint32_t cols = detail::get_u32(in);
    if (rows == 0 || cols == 0) {
        throw Error(ErrorKind::SchemaViolation, "AIRM map has an empty dimension");
    }
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> buffer(n * 4);
    if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()))) {
        throw Error(ErrorKind::SchemaViolation, "truncated AIRM payload");
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(buffer[4 * i]) |
                                   (static_cast<std::uint32_t>(buffer[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(buffer[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(buffer[4 * i + 3]) << 24);
        values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    const Frame f = frame.value_or(Frame{static_cast<double>(cols), static_cast<double>(rows)});
    return AttentionMap(rows, cols, f, std::move(values));
}

inline void save_airm(const std::filesystem::path& path, const AttentionMap& map)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    write_airm(out, map);
}

inline AttentionMap load_airm(const std::filesystem::path& path, std::optional<Frame> frame = std::nullopt)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    return read_airm(in, frame);
}

} // namespace air
