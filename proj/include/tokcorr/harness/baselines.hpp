// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tokcorr/core.hpp"
#include "tokcorr/density.hpp"
#include "tokcorr/pipeline.hpp"
#include "tokcorr/random.hpp"
#include "tokcorr/selection.hpp"

namespace tokcorr::harness {

enum class BaselineMethod {
    /// Uniformly random tokens, as many as the adaptive local branch samples.
    Random,
    /// Every ceil(N/m)-th token for the adaptive m.
    Uniform,
    /// Attention-guided sampling of round(ratio * N) tokens.
    FixedRatio,
};

struct Baseline {
    BaselineMethod method = BaselineMethod::Random;
    double ratio = 0.5;  // FixedRatio only
};

inline std::string to_string(BaselineMethod m) {
    switch (m) {
    case BaselineMethod::Random: return "random";
    case BaselineMethod::Uniform: return "uniform";
    case BaselineMethod::FixedRatio: return "fixed";
    }
    return "unknown";
}

/// m distinct indices drawn uniformly from [0, n) (partial Fisher-Yates).
inline IndexSet uniform_without_replacement(std::size_t n, std::size_t m, Rng& rng) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) {
        std::swap(pool[i], pool[i + uniform_below(rng, n - i)]);
    }
    IndexSet out(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(out.begin(), out.end());
    return out;
}

inline IndexSet stride_indices(std::size_t n, std::size_t m) {
    IndexSet out;
    if (m == 0) {
        return out;
    }
    const std::size_t stride = (n + m - 1) / m;
    for (std::size_t i = 0; i < n; i += stride) {
        out.push_back(i);
    }
    return out;
}

/// Baseline token choice for one sub-image. Only the local branch is
/// replaced; there is no IQR branch, so the fixed-ratio count is exact.
inline SelectionResult baseline_select(const Baseline& baseline,
                                       const SubImageBundle& bundle,
                                       const DensityReport& density,
                                       const SelectionConfig& cfg) {
    const std::size_t n = bundle.n_tokens();
    Rng rng(cfg.seed);
    IndexSet local;
    switch (baseline.method) {
    case BaselineMethod::Random:
        local = uniform_without_replacement(n, local_sample_count(density.density, n), rng);
        break;
    case BaselineMethod::Uniform:
        local = stride_indices(n, local_sample_count(density.density, n));
        break;
    case BaselineMethod::FixedRatio:
        if (!(baseline.ratio >= 0.0 && baseline.ratio <= 1.0)) {
            throw Error(ErrorCode::InvalidConfig, "fixed ratio must lie in [0, 1]");
        }
        local = local_select(bundle.attn_low, local_sample_count(baseline.ratio, n), rng);
        break;
    }
    return merge_indices({}, std::move(local), bundle.attn_low, cfg);
}

inline SelectionResult baseline_select(const Baseline& baseline,
                                       const SubImageBundle& bundle,
                                       std::uint64_t seed,
                                       const DensityConfig& density_cfg = {}) {
    SelectionConfig cfg;
    cfg.seed = seed;
    return baseline_select(baseline, bundle, compute_density(bundle.keys_low, density_cfg), cfg);
}

/// Same output as compress_subimage with the selection swapped out.
inline CompressionResult baseline_compress(const Baseline& baseline,
                                           const SubImageBundle& bundle,
                                           const CompressOptions& opts = {}) {
    if (bundle.is_global) {
        throw Error(ErrorCode::GlobalImageRejected, "bundle '" + bundle.source.id + "' is the global image");
    }
    bundle.validate();
    DensityReport density = compute_density(bundle.keys_low, opts.density);
    SelectionResult sel = baseline_select(baseline, bundle, density, opts.selection);
    return finish_compression(bundle, std::move(density), std::move(sel), opts.aggregation, opts.selection.seed);
}

/// Document-level counterpart of compress_document for a baseline.
inline std::vector<DocumentEntry> baseline_document(const Baseline& baseline,
                                                    const std::vector<SubImageBundle>& bundles,
                                                    const CompressOptions& opts = {}) {
    const auto n_global = std::count_if(bundles.begin(), bundles.end(), [](const auto& b) { return b.is_global; });
    if (n_global > 1) {
        throw Error(ErrorCode::MultipleGlobalImages,
                    std::to_string(n_global) + " bundles are marked as the global image");
    }
    std::vector<DocumentEntry> entries(bundles.size());
    parallel_for_each_index(bundles.size(), opts.threads, [&](std::size_t i) {
        if (bundles[i].is_global) {
            bundles[i].validate();
            entries[i] = GlobalPassthrough{bundles[i].y_last};
            return;
        }
        CompressOptions local = opts;
        local.selection.seed = derive_stream_seed(opts.selection.seed, i);
        entries[i] = baseline_compress(baseline, bundles[i], local);
    });
    return entries;
}

}  // namespace tokcorr::harness
