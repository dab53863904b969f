// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

// TKZT tensor files. Layout, all integers little-endian:
//
//   offset  size      field
//   0       4         magic "TKZT"
//   4       2         version (u16, currently 1)
//   6       1         dtype code (u8, 1 = f32)
//   7       1         ndim (u8)
//   8       4*ndim    dims (u32 each, outermost first)
//   ...     4*prod    payload, row-major IEEE-754 binary32

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tokcorr/core.hpp"

namespace tokcorr::io {

inline constexpr char kTensorMagic[4] = {'T', 'K', 'Z', 'T'};
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::size_t kMaxTensorRank = 8;

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t element_count() const {
        std::size_t count = 1;
        for (auto d : dims) {
            count *= d;
        }
        return count;
    }

    bool operator==(const Tensor&) const = default;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    if (t.dims.size() > kMaxTensorRank) {
        throw Error(ErrorCode::DimensionMismatch, "tensor rank " + std::to_string(t.dims.size()) + " too large");
    }
    if (t.element_count() != t.data.size()) {
        throw Error(ErrorCode::DimensionMismatch, "tensor payload has " + std::to_string(t.data.size()) +
                                                      " values, dims need " + std::to_string(t.element_count()));
    }
    std::vector<std::uint8_t> out;
    out.reserve(8 + 4 * t.dims.size() + 4 * t.data.size());
    out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
    detail::put_u16(out, kTensorVersion);
    out.push_back(kDtypeF32);
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) {
        detail::put_u32(out, d);
    }
    for (float v : t.data) {
        detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

/// `origin` names the source (usually a path) in error messages.
inline Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>") {
    if (bytes.size() < 8) {
        throw Error(ErrorCode::TruncatedFile, origin + ": header needs 8 bytes, file has " +
                                                  std::to_string(bytes.size()));
    }
    if (!std::equal(std::begin(kTensorMagic), std::end(kTensorMagic), bytes.begin())) {
        throw Error(ErrorCode::BadMagic, origin + ": not a TKZT tensor file");
    }
    const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (version != kTensorVersion) {
        throw Error(ErrorCode::UnsupportedVersion, origin + ": version " + std::to_string(version));
    }
    if (bytes[6] != kDtypeF32) {
        throw Error(ErrorCode::UnsupportedDtype, origin + ": dtype code " + std::to_string(bytes[6]));
    }
    const std::size_t ndim = bytes[7];
    if (ndim > kMaxTensorRank) {
        throw Error(ErrorCode::ParseError, origin + ": rank " + std::to_string(ndim) + " exceeds " +
                                               std::to_string(kMaxTensorRank));
    }
    const std::size_t header = 8 + 4 * ndim;
    if (bytes.size() < header) {
        throw Error(ErrorCode::TruncatedFile, origin + ": dims cut short");
    }
    Tensor t;
    for (std::size_t i = 0; i < ndim; ++i) {
        t.dims.push_back(detail::get_u32(bytes.data() + 8 + 4 * i));
    }
    const std::size_t payload = bytes.size() - header;
    std::size_t count = 1;
    bool too_large = false;
    if (std::find(t.dims.begin(), t.dims.end(), 0u) != t.dims.end()) {
        count = 0;
    } else {
        for (std::uint32_t d : t.dims) {
            if (count > payload / 4 / d) {
                too_large = true;
                break;
            }
            count *= d;
        }
    }
    if (too_large || payload < 4 * count) {
        throw Error(ErrorCode::TruncatedFile, origin + ": payload has " + std::to_string(payload) + " bytes");
    }
    if (payload != 4 * count) {
        throw Error(ErrorCode::ParseError, origin + ": " + std::to_string(payload - 4 * count) +
                                               " trailing bytes after payload");
    }
    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        t.data[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + header + 4 * i));
    }
    return t;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorCode::IoError, "short write to " + path.string());
    }
}

inline Tensor read_tensor_file(const std::filesystem::path& path) {
    return decode_tensor(read_file_bytes(path), path.string());
}

inline void write_tensor_file(const std::filesystem::path& path, const Tensor& t) {
    write_file_bytes(path, encode_tensor(t));
}

template <typename Tag>
Tensor to_tensor(const Matrix<Tag>& m) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    t.data.assign(m.data().begin(), m.data().end());
    return t;
}

inline Tensor to_tensor(const AttentionVector& v) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(v.size())};
    t.data.assign(v.scores().begin(), v.scores().end());
    return t;
}

}  // namespace tokcorr::io
