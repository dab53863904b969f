// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tokcorr/core.hpp"

namespace tokcorr {

enum class KeySource {
    Deep,
    Low,
};

struct AggregationConfig {
    /// Neighbors absorbed into each retained token.
    std::size_t knn_k = 3;
    /// Keep the retained token itself in its group.
    bool include_self = true;
    /// Rescale the group's attention weights to sum to one.
    bool normalize_weights = true;
    /// Which layer's keys define neighbor similarity.
    KeySource key_source = KeySource::Deep;

    void validate() const {
        if (!include_self && knn_k == 0) {
            throw Error(ErrorCode::InvalidConfig, "knn_k = 0 without include_self leaves every group empty");
        }
    }
};

/// The knn_k tokens other than `center` with the highest cosine similarity,
/// ties resolved towards the lower index. Keys must be unit-normalized.
inline std::vector<std::size_t> nearest_neighbors(const KeyMatrix& unit_keys, std::size_t center, std::size_t knn_k) {
    const std::size_t n = unit_keys.rows();
    std::vector<std::pair<double, std::size_t>> candidates;
    candidates.reserve(n - 1);
    const auto c = unit_keys.row(center);
    for (std::size_t p = 0; p < n; ++p) {
        if (p != center) {
            candidates.emplace_back(dot(c, unit_keys.row(p)), p);
        }
    }
    const auto by_similarity = [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(knn_k), candidates.end(),
                      by_similarity);
    std::vector<std::size_t> out(knn_k);
    for (std::size_t i = 0; i < knn_k; ++i) {
        out[i] = candidates[i].second;
    }
    return out;
}

/// Replaces each retained token by the attention-weighted sum of its group
/// (itself plus its key-space nearest neighbors) so content of dropped tokens
/// is folded into the survivors. Output rows follow the order of `retained`.
inline TokenMatrix aggregate(const TokenMatrix& tokens,
                             const KeyMatrix& keys,
                             const AttentionVector& attn,
                             const IndexSet& retained,
                             const AggregationConfig& cfg = {}) {
    cfg.validate();
    const std::size_t n = tokens.rows();
    if (retained.empty()) {
        throw Error(ErrorCode::EmptyRetention, "no retained tokens to aggregate");
    }
    if (keys.rows() != n || attn.size() != n) {
        throw Error(ErrorCode::DimensionMismatch,
                    "tokens have " + std::to_string(n) + " rows, keys " + std::to_string(keys.rows()) +
                        ", attention " + std::to_string(attn.size()));
    }
    if (cfg.knn_k + 1 > n) {
        throw Error(ErrorCode::NeighborCountExceedsTokens,
                    "knn_k = " + std::to_string(cfg.knn_k) + " needs more than " + std::to_string(n) + " tokens");
    }
    for (std::size_t l : retained) {
        if (l >= n) {
            throw Error(ErrorCode::DimensionMismatch, "retained index " + std::to_string(l) + " out of range");
        }
    }

    const KeyMatrix unit = normalize_rows(keys);
    const std::size_t dim = tokens.cols();
    TokenMatrix out(retained.size(), dim);
    std::vector<std::size_t> group;
    std::vector<double> weights;
    for (std::size_t r = 0; r < retained.size(); ++r) {
        const std::size_t l = retained[r];
        group = nearest_neighbors(unit, l, cfg.knn_k);
        if (cfg.include_self) {
            group.insert(group.begin(), l);
        }
        weights.resize(group.size());
        double total = 0.0;
        for (std::size_t g = 0; g < group.size(); ++g) {
            weights[g] = attn[group[g]];
            total += weights[g];
        }
        if (cfg.normalize_weights) {
            if (total > 0.0) {
                for (double& w : weights) {
                    w /= total;
                }
            } else {
                // No attention mass in the group: plain average.
                std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(group.size()));
            }
        }
        auto dst = out.row(r);
        for (std::size_t g = 0; g < group.size(); ++g) {
            const auto src = tokens.row(group[g]);
            for (std::size_t c = 0; c < dim; ++c) {
                dst[c] += weights[g] * src[c];
            }
        }
    }
    return out;
}

}  // namespace tokcorr
