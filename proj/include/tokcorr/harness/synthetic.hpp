// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tokcorr/core.hpp"
#include "tokcorr/pipeline.hpp"
#include "tokcorr/random.hpp"
#include "tokcorr/selection.hpp"

namespace tokcorr::harness {

enum class AttentionProfile {
    Uniform,
    /// Unique tokens carry almost all attention; redundant ones get a small
    /// positive share so sampling never runs out of support.
    ConcentratedOnUnique,
    /// Uniform attention, plus `outlier_count` deep-layer spikes.
    WithOutliers,
};

struct SyntheticSpec {
    std::size_t n_tokens = 64;
    std::size_t dim = 72;
    /// Fraction of tokens that are near-copies of a cluster centroid.
    double redundancy_fraction = 0.0;
    std::size_t n_clusters = 1;
    AttentionProfile attention_profile = AttentionProfile::Uniform;
    std::size_t outlier_count = 0;
    /// Token embedding width; 0 reuses `dim`.
    std::size_t token_dim = 0;
    /// Bound on the Euclidean norm of the noise added to each unit key.
    double perturbation = 0.01;
    /// Attention share of a redundant token relative to a unique one under
    /// ConcentratedOnUnique.
    double background_attention = 1e-3;
    std::uint64_t seed = 0;
};

/// A generated bundle plus the ground truth it was built from.
struct SyntheticBundle {
    SubImageBundle bundle;
    IndexSet redundant_indices;
    IndexSet unique_indices;
    IndexSet outlier_indices;
    /// cluster_of[i] is the cluster of token i, or -1 for unique tokens.
    std::vector<int> cluster_of;
};

/// rows x cols with rows the largest divisor of n not above sqrt(n).
inline GridShape near_square_grid(std::size_t n) {
    std::size_t rows = 1;
    for (std::size_t r = 1; r * r <= n; ++r) {
        if (n % r == 0) {
            rows = r;
        }
    }
    return {rows, n / rows};
}

inline std::size_t redundant_count(const SyntheticSpec& spec) {
    return static_cast<std::size_t>(std::round(spec.redundancy_fraction * static_cast<double>(spec.n_tokens)));
}

namespace detail {

inline double symmetric_uniform(Rng& rng) {
    return 2.0 * uniform01(rng) - 1.0;
}

/// Basis vector `axis` plus bounded noise.
inline void fill_key_row(std::span<double> row, std::size_t axis, double perturbation, Rng& rng) {
    const double scale = perturbation / std::sqrt(static_cast<double>(row.size()));
    for (double& x : row) {
        x = scale * symmetric_uniform(rng);
    }
    row[axis] += 1.0;
}

inline void validate_spec(const SyntheticSpec& spec) {
    const auto fail = [](const std::string& why) { throw Error(ErrorCode::InfeasibleSpec, why); };
    if (spec.n_tokens == 0 || spec.dim == 0) {
        fail("n_tokens and dim must be positive");
    }
    if (!(spec.redundancy_fraction >= 0.0 && spec.redundancy_fraction <= 1.0)) {
        fail("redundancy_fraction must lie in [0, 1]");
    }
    const std::size_t r = redundant_count(spec);
    if (r > 0 && (spec.n_clusters == 0 || spec.n_clusters > r)) {
        fail("need between 1 and " + std::to_string(r) + " clusters for " + std::to_string(r) + " redundant tokens");
    }
    const std::size_t clusters = r > 0 ? spec.n_clusters : 0;
    const std::size_t axes = spec.n_tokens - r + clusters;
    if (spec.dim < axes) {
        fail("dim " + std::to_string(spec.dim) + " cannot hold " + std::to_string(axes) + " orthogonal directions");
    }
    if (!(spec.perturbation >= 0.0 && spec.perturbation < 0.05)) {
        fail("perturbation must lie in [0, 0.05) to keep clusters above 0.99 cosine");
    }
    if (!(spec.background_attention > 0.0)) {
        fail("background_attention must be positive");
    }
    if (spec.attention_profile == AttentionProfile::WithOutliers) {
        // The outliers must all sit above the third-quartile position.
        const double q3_pos = 0.75 * static_cast<double>(spec.n_tokens - 1);
        const auto q3_hi = static_cast<std::size_t>(std::ceil(q3_pos));
        if (spec.outlier_count == 0 || q3_hi + spec.outlier_count >= spec.n_tokens) {
            fail("outlier_count must be positive and leave the upper quartile unaffected");
        }
    }
}

}  // namespace detail

/// Builds keys whose redundant tokens are near-copies of a few cluster
/// centroids and whose unique tokens point along distinct axes, with
/// attention shaped by the requested profile. Token positions are shuffled.
inline SyntheticBundle generate(const SyntheticSpec& spec) {
    detail::validate_spec(spec);
    Rng rng(spec.seed);
    const std::size_t n = spec.n_tokens;
    const std::size_t n_red = redundant_count(spec);
    const std::size_t n_unique = n - n_red;
    const std::size_t clusters = n_red > 0 ? spec.n_clusters : 0;

    // Role by slot: the first n_unique slots are unique, then clusters in turn.
    std::vector<int> role(n, -1);
    for (std::size_t k = 0; k < n_red; ++k) {
        role[n_unique + k] = static_cast<int>(k % clusters);
    }
    std::vector<std::size_t> position(n);
    std::iota(position.begin(), position.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        std::swap(position[i - 1], position[uniform_below(rng, i)]);
    }

    SyntheticBundle out;
    out.cluster_of.assign(n, -1);
    SubImageBundle& b = out.bundle;
    b.grid = near_square_grid(n);
    b.source.id = "synthetic";
    b.source.dataset = "synthetic";
    b.keys_low = KeyMatrix(n, spec.dim);
    b.keys_deep = KeyMatrix(n, spec.dim);
    const std::size_t token_dim = spec.token_dim == 0 ? spec.dim : spec.token_dim;
    b.y_last = TokenMatrix(n, token_dim);

    std::size_t next_unique_axis = 0;
    for (std::size_t slot = 0; slot < n; ++slot) {
        const std::size_t tok = position[slot];
        std::size_t axis = 0;
        if (role[slot] < 0) {
            axis = next_unique_axis++;
            out.unique_indices.push_back(tok);
        } else {
            axis = n_unique + static_cast<std::size_t>(role[slot]);
            out.redundant_indices.push_back(tok);
            out.cluster_of[tok] = role[slot];
        }
        detail::fill_key_row(b.keys_low.row(tok), axis, spec.perturbation, rng);
        detail::fill_key_row(b.keys_deep.row(tok), axis, spec.perturbation, rng);
        for (double& x : b.y_last.row(tok)) {
            x = detail::symmetric_uniform(rng);
        }
    }
    std::sort(out.unique_indices.begin(), out.unique_indices.end());
    std::sort(out.redundant_indices.begin(), out.redundant_indices.end());

    std::vector<double> low(n, 1.0), deep(n, 1.0);
    switch (spec.attention_profile) {
    case AttentionProfile::Uniform:
        break;
    case AttentionProfile::ConcentratedOnUnique:
        if (n_unique > 0) {
            for (std::size_t i : out.redundant_indices) {
                low[i] = spec.background_attention;
                deep[i] = spec.background_attention;
            }
        }
        break;
    case AttentionProfile::WithOutliers: {
        // Prefer unique tokens as outlier carriers, then fill from the rest.
        std::vector<std::size_t> carriers = out.unique_indices;
        carriers.insert(carriers.end(), out.redundant_indices.begin(), out.redundant_indices.end());
        std::vector<std::size_t> head(carriers.begin(),
                                      carriers.begin() + static_cast<std::ptrdiff_t>(std::min(n_unique, carriers.size())));
        for (std::size_t i = head.size(); i > 1; --i) {
            std::swap(head[i - 1], head[uniform_below(rng, i)]);
        }
        std::copy(head.begin(), head.end(), carriers.begin());
        const double fence = iqr_upper_fence(deep, 1.5);
        for (std::size_t k = 0; k < spec.outlier_count; ++k) {
            deep[carriers[k]] = 10.0 * fence;
            out.outlier_indices.push_back(carriers[k]);
        }
        std::sort(out.outlier_indices.begin(), out.outlier_indices.end());
        break;
    }
    }
    const auto normalized = [](std::vector<double> v) {
        double total = 0.0;
        for (double x : v) {
            total += x;
        }
        for (double& x : v) {
            x /= total;
        }
        return AttentionVector(std::move(v));
    };
    b.attn_low = normalized(std::move(low));
    b.attn_deep = normalized(std::move(deep));
    return out;
}

/// Fixed 4x4 example: twelve identical keys and four orthogonal ones on the
/// diagonal, low-layer attention only on the diagonal, deep-layer attention
/// 0.2 on each diagonal token and 1/60 elsewhere. Token i embeds as
/// (i + 1, i % 4, i / 4, 1). Meant to be run with limit_k = 3.
inline SubImageBundle hand_trace_bundle() {
    constexpr std::size_t n = 16;
    SubImageBundle b;
    b.grid = {4, 4};
    b.source.id = "hand_trace";
    b.source.dataset = "synthetic";
    b.keys_low = KeyMatrix(n, 5);
    b.y_last = TokenMatrix(n, 4);
    std::vector<double> low(n, 0.0), deep(n, 1.0 / 60.0);
    std::size_t next_axis = 1;
    for (std::size_t i = 0; i < n; ++i) {
        const bool diagonal = i % 5 == 0;
        b.keys_low(i, diagonal ? next_axis++ : 0) = 1.0;
        if (diagonal) {
            low[i] = 0.25;
            deep[i] = 0.2;
        }
        b.y_last(i, 0) = static_cast<double>(i + 1);
        b.y_last(i, 1) = static_cast<double>(i % 4);
        b.y_last(i, 2) = static_cast<double>(i / 4);
        b.y_last(i, 3) = 1.0;
    }
    b.keys_deep = b.keys_low;
    b.attn_low = AttentionVector(std::move(low));
    b.attn_deep = AttentionVector(std::move(deep));
    return b;
}

/// Options used with hand_trace_bundle(): defaults with limit_k = 3.
inline CompressOptions hand_trace_options() {
    CompressOptions opts;
    opts.density.limit_k = 3;
    return opts;
}

}  // namespace tokcorr::harness
