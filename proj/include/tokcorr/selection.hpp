// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tokcorr/core.hpp"
#include "tokcorr/random.hpp"

namespace tokcorr {

enum class QuantileMethod {
    Linear,  ///< interpolate between order statistics at q*(n-1)
};

struct SelectionConfig {
    /// Multiplier of the interquartile range above Q3 for the outlier fence.
    double iqr_factor = 1.5;
    QuantileMethod quantile_method = QuantileMethod::Linear;
    /// Lower bound on the merged index count; topped up from low-layer attention.
    std::size_t min_retained = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(iqr_factor > 0.0) || !std::isfinite(iqr_factor)) {
            throw Error(ErrorCode::InvalidConfig, "iqr_factor must be positive");
        }
        if (min_retained < 1) {
            throw Error(ErrorCode::InvalidConfig, "min_retained must be at least 1");
        }
    }
};

struct SelectionResult {
    IndexSet global_indices;
    IndexSet local_indices;
    /// Indices added only to satisfy min_retained.
    IndexSet fallback_indices;
    IndexSet merged_indices;

    bool operator==(const SelectionResult&) const = default;
};

/// Upper IQR fence Q3 + factor * (Q3 - Q1) of the scores.
inline double iqr_upper_fence(std::span<const double> scores, double iqr_factor) {
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const double q1 = quantile_sorted(sorted, 0.25);
    const double q3 = quantile_sorted(sorted, 0.75);
    return q3 + iqr_factor * (q3 - q1);
}

/// Global branch: tokens whose deep-layer CLS attention is an upper outlier.
inline IndexSet global_select(const AttentionVector& attn_deep, const SelectionConfig& cfg = {}) {
    if (attn_deep.empty()) {
        throw Error(ErrorCode::EmptyInput, "global_select on empty attention");
    }
    cfg.validate();
    const double fence = iqr_upper_fence(attn_deep.scores(), cfg.iqr_factor);
    IndexSet selected;
    for (std::size_t i = 0; i < attn_deep.size(); ++i) {
        if (attn_deep[i] > fence) {
            selected.push_back(i);
        }
    }
    return selected;
}

/// Number of local-branch samples: density times token count, rounded half
/// away from zero and clamped to [0, n].
inline std::size_t local_sample_count(double density, std::size_t n_tokens) {
    const double m = std::round(density * static_cast<double>(n_tokens));
    if (!(m > 0.0)) {
        return 0;
    }
    return std::min(static_cast<std::size_t>(m), n_tokens);
}

/// Weighted sampling without replacement by sequential renormalized draws:
/// each draw picks a remaining token with probability proportional to its
/// score, then removes it.
inline IndexSet local_select(const AttentionVector& attn_low, std::size_t m, Rng& rng) {
    const std::size_t n = attn_low.size();
    if (m == 0) {
        return {};
    }
    std::vector<double> weights(attn_low.scores().begin(), attn_low.scores().end());
    std::size_t support = 0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) {
            throw Error(ErrorCode::InvalidAttention, "attention scores must be finite and nonnegative");
        }
        if (w > 0.0) {
            ++support;
        }
    }
    if (support < m) {
        throw Error(ErrorCode::InsufficientSupport,
                    "requested " + std::to_string(m) + " samples but only " + std::to_string(support) +
                        " tokens have positive attention");
    }

    IndexSet picked;
    picked.reserve(m);
    for (std::size_t draw = 0; draw < m; ++draw) {
        double total = 0.0;
        for (double w : weights) {
            total += w;
        }
        const double target = uniform01(rng) * total;
        double cumulative = 0.0;
        std::size_t choice = n;
        std::size_t last_positive = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (weights[i] <= 0.0) {
                continue;
            }
            last_positive = i;
            cumulative += weights[i];
            if (target < cumulative) {
                choice = i;
                break;
            }
        }
        // Rounding can leave target at or beyond the accumulated sum.
        if (choice == n) {
            choice = last_positive;
        }
        picked.push_back(choice);
        weights[choice] = 0.0;
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

inline IndexSet local_select(const AttentionVector& attn_low, std::size_t m, const SelectionConfig& cfg) {
    Rng rng(cfg.seed);
    return local_select(attn_low, m, rng);
}

/// Sorted union of both branches, topped up with the highest low-layer
/// attention tokens (lowest index first on ties) while below min_retained.
inline SelectionResult merge_indices(IndexSet global,
                                     IndexSet local,
                                     const AttentionVector& attn_low,
                                     const SelectionConfig& cfg = {}) {
    cfg.validate();
    SelectionResult result;
    std::sort(global.begin(), global.end());
    global.erase(std::unique(global.begin(), global.end()), global.end());
    std::sort(local.begin(), local.end());
    local.erase(std::unique(local.begin(), local.end()), local.end());

    std::set_union(global.begin(), global.end(), local.begin(), local.end(),
                   std::back_inserter(result.merged_indices));

    const std::size_t want = std::min(cfg.min_retained, attn_low.size());
    if (result.merged_indices.size() < want) {
        std::vector<std::size_t> order(attn_low.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return attn_low[a] > attn_low[b];
        });
        for (std::size_t idx : order) {
            if (result.merged_indices.size() + result.fallback_indices.size() >= want) {
                break;
            }
            if (!std::binary_search(result.merged_indices.begin(), result.merged_indices.end(), idx)) {
                result.fallback_indices.push_back(idx);
            }
        }
        std::sort(result.fallback_indices.begin(), result.fallback_indices.end());
        IndexSet merged;
        std::set_union(result.merged_indices.begin(), result.merged_indices.end(),
                       result.fallback_indices.begin(), result.fallback_indices.end(), std::back_inserter(merged));
        result.merged_indices = std::move(merged);
    }
    result.global_indices = std::move(global);
    result.local_indices = std::move(local);
    return result;
}

}  // namespace tokcorr
