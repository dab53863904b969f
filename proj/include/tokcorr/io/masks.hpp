// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tokcorr/core.hpp"
#include "tokcorr/pipeline.hpp"

namespace tokcorr::io {

inline constexpr std::uint8_t kMaskBright = 255;
inline constexpr std::uint8_t kMaskMid = 128;
inline constexpr std::uint8_t kMaskDark = 0;

struct Graymap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    std::uint8_t at(std::size_t x, std::size_t y) const {
        return pixels[y * width + x];
    }

    /// Plain (ASCII, "P2") PGM with maxval 255, one raster row per line.
    std::string to_plain_pgm() const {
        std::string out = "P2\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                if (x > 0) {
                    out += ' ';
                }
                out += std::to_string(at(x, y));
            }
            out += '\n';
        }
        return out;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::IoError, "cannot write " + path.string());
        }
        out << to_plain_pgm();
    }
};

struct MaskPair {
    /// Redundant patches bright, the rest dark.
    Graymap redundancy;
    /// Global-branch tokens bright, other retained tokens mid gray, dropped dark.
    Graymap selection;
};

namespace detail {

inline Graymap upscale(const GridShape& grid, const std::vector<std::uint8_t>& cells, std::size_t scale) {
    Graymap g;
    g.width = grid.cols * scale;
    g.height = grid.rows * scale;
    g.pixels.resize(g.width * g.height);
    for (std::size_t y = 0; y < g.height; ++y) {
        for (std::size_t x = 0; x < g.width; ++x) {
            g.pixels[y * g.width + x] = cells[(y / scale) * grid.cols + (x / scale)];
        }
    }
    return g;
}

}  // namespace detail

/// Per-patch masks at `scale` pixels per patch. Tokens that were both a
/// global outlier and sampled count as global; min_retained fallbacks count
/// as local since they come from low-layer attention.
inline MaskPair render_masks(const GridShape& grid,
                             const std::vector<bool>& redundant_mask,
                             const IndexSet& retained,
                             const std::vector<Provenance>& provenance,
                             std::size_t scale = 1) {
    const std::size_t n = grid.cells();
    if (n == 0 || redundant_mask.size() != n) {
        throw Error(ErrorCode::GridMismatch, "grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                                                 " does not match " + std::to_string(redundant_mask.size()) +
                                                 " tokens");
    }
    if (retained.size() != provenance.size()) {
        throw Error(ErrorCode::DimensionMismatch, "provenance tags do not match retained indices");
    }
    if (scale == 0) {
        throw Error(ErrorCode::InvalidConfig, "mask scale must be positive");
    }
    std::vector<std::uint8_t> red(n), sel(n, kMaskDark);
    for (std::size_t i = 0; i < n; ++i) {
        red[i] = redundant_mask[i] ? kMaskBright : kMaskDark;
    }
    for (std::size_t r = 0; r < retained.size(); ++r) {
        if (retained[r] >= n) {
            throw Error(ErrorCode::GridMismatch, "retained index " + std::to_string(retained[r]) + " outside grid");
        }
        const Provenance p = provenance[r];
        sel[retained[r]] = (p == Provenance::Global || p == Provenance::Both) ? kMaskBright : kMaskMid;
    }
    return {detail::upscale(grid, red, scale), detail::upscale(grid, sel, scale)};
}

inline MaskPair render_masks(const SubImageBundle& bundle, const CompressionResult& result, std::size_t scale = 1) {
    return render_masks(bundle.grid, result.density_report.redundant_mask, result.retained_indices,
                        result.branch_provenance, scale);
}

/// Writes `<stem>.redundancy.pgm` and `<stem>.selection.pgm` under `out_dir`.
inline void write_masks(const MaskPair& masks, const std::filesystem::path& out_dir, const std::string& stem) {
    std::filesystem::create_directories(out_dir);
    masks.redundancy.write(out_dir / (stem + ".redundancy.pgm"));
    masks.selection.write(out_dir / (stem + ".selection.pgm"));
}

}  // namespace tokcorr::io
