// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tokcorr/core.hpp"

namespace tokcorr {

/// Thresholds for deciding that a patch token is redundant.
struct DensityConfig {
    /// Cosine similarity a peer must strictly exceed to count as "similar".
    double alpha = 0.7;
    /// A token is redundant when its similar-peer count strictly exceeds this.
    std::size_t limit_k = 50;
    /// Count the token itself (S[i][i] = 1 > alpha) among its similar peers.
    bool count_self = false;

    void validate() const {
        if (!(alpha > -1.0 && alpha < 1.0)) {
            throw Error(ErrorCode::InvalidConfig, "density alpha must lie in (-1, 1), got " + std::to_string(alpha));
        }
    }
};

struct DensityReport {
    std::size_t n_redundant = 0;
    double redundancy = 0.0;
    double density = 1.0;
    std::vector<bool> redundant_mask;

    bool operator==(const DensityReport&) const = default;
};

/// Counts, for every token, how many other tokens have key cosine similarity
/// above alpha; tokens with more than limit_k such peers are redundant.
/// Density is the non-redundant fraction of the sub-image.
inline DensityReport compute_density(const KeyMatrix& keys, const DensityConfig& cfg = {}) {
    cfg.validate();
    const KeyMatrix unit = normalize_rows(keys);
    const SimilarityMatrix sim = similarity_matrix(unit);
    const std::size_t n = unit.rows();

    DensityReport report;
    report.redundant_mask.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t similar = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i && !cfg.count_self) {
                continue;
            }
            if (sim(i, j) > cfg.alpha) {
                ++similar;
            }
        }
        if (similar > cfg.limit_k) {
            report.redundant_mask[i] = true;
            ++report.n_redundant;
        }
    }
    report.redundancy = static_cast<double>(report.n_redundant) / static_cast<double>(n);
    report.density = 1.0 - report.redundancy;
    return report;
}

}  // namespace tokcorr
