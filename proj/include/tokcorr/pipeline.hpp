// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "tokcorr/aggregation.hpp"
#include "tokcorr/core.hpp"
#include "tokcorr/density.hpp"
#include "tokcorr/random.hpp"
#include "tokcorr/selection.hpp"

namespace tokcorr {

struct GridShape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t cells() const noexcept {
        return rows * cols;
    }
    bool operator==(const GridShape&) const = default;
};

/// Where a sub-image came from; carried through to outputs untouched.
struct SourceInfo {
    std::string id;
    std::string dataset;
    std::string image_id;
    std::size_t crop_row = 0;
    std::size_t crop_col = 0;

    bool operator==(const SourceInfo&) const = default;
};

/// Everything exported from the vision encoder for one sub-image. A global
/// (whole-document) bundle only needs `y_last`.
struct SubImageBundle {
    TokenMatrix y_last;
    KeyMatrix keys_low;
    AttentionVector attn_low;
    KeyMatrix keys_deep;
    AttentionVector attn_deep;
    GridShape grid;
    bool is_global = false;
    SourceInfo source;

    std::size_t n_tokens() const noexcept {
        return y_last.rows();
    }

    void validate() const {
        const std::size_t n = y_last.rows();
        if (n == 0 || y_last.cols() == 0) {
            throw Error(ErrorCode::DimensionMismatch, "bundle '" + source.id + "' has no tokens");
        }
        if (grid.cells() != n) {
            throw Error(ErrorCode::GridMismatch, "bundle '" + source.id + "' grid " + std::to_string(grid.rows) +
                                                     "x" + std::to_string(grid.cols) + " does not cover " +
                                                     std::to_string(n) + " tokens");
        }
        if (is_global) {
            return;
        }
        const auto check = [&](std::size_t got, const char* what) {
            if (got != n) {
                throw Error(ErrorCode::DimensionMismatch, "bundle '" + source.id + "' " + what + " has " +
                                                              std::to_string(got) + " entries, y_last has " +
                                                              std::to_string(n));
            }
        };
        check(keys_low.rows(), "keys_low");
        check(keys_deep.rows(), "keys_deep");
        check(attn_low.size(), "attn_low");
        check(attn_deep.size(), "attn_deep");
    }
};

struct CompressOptions {
    DensityConfig density;
    SelectionConfig selection;
    AggregationConfig aggregation;
    /// Worker threads for compress_document; 0 picks hardware concurrency.
    std::size_t threads = 1;
};

enum class Provenance : std::uint8_t {
    Global,
    Local,
    Both,
    Fallback,
};

inline std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::Global: return "global";
    case Provenance::Local: return "local";
    case Provenance::Both: return "both";
    case Provenance::Fallback: return "fallback";
    }
    return "unknown";
}

struct CompressionResult {
    IndexSet retained_indices;
    TokenMatrix compressed_tokens;
    DensityReport density_report;
    SelectionResult selection;
    /// One tag per entry of retained_indices.
    std::vector<Provenance> branch_provenance;
    std::size_t n_tokens = 0;
    double ratio = 1.0;
    /// Seed of the sampling stream actually used for this sub-image.
    std::uint64_t stream_seed = 0;

    bool operator==(const CompressionResult&) const = default;
};

inline std::vector<Provenance> tag_provenance(const SelectionResult& sel) {
    std::vector<Provenance> tags;
    tags.reserve(sel.merged_indices.size());
    const auto has = [](const IndexSet& set, std::size_t i) { return std::binary_search(set.begin(), set.end(), i); };
    for (std::size_t i : sel.merged_indices) {
        const bool g = has(sel.global_indices, i);
        const bool l = has(sel.local_indices, i);
        if (g && l) {
            tags.push_back(Provenance::Both);
        } else if (g) {
            tags.push_back(Provenance::Global);
        } else if (l) {
            tags.push_back(Provenance::Local);
        } else {
            tags.push_back(Provenance::Fallback);
        }
    }
    return tags;
}

/// Aggregation and bookkeeping shared by the adaptive path and the baselines.
inline CompressionResult finish_compression(const SubImageBundle& bundle,
                                            DensityReport density,
                                            SelectionResult selection,
                                            const AggregationConfig& agg_cfg,
                                            std::uint64_t stream_seed) {
    CompressionResult result;
    result.n_tokens = bundle.n_tokens();
    const KeyMatrix& keys = agg_cfg.key_source == KeySource::Deep ? bundle.keys_deep : bundle.keys_low;
    result.compressed_tokens = aggregate(bundle.y_last, keys, bundle.attn_deep, selection.merged_indices, agg_cfg);
    result.retained_indices = selection.merged_indices;
    result.branch_provenance = tag_provenance(selection);
    result.density_report = std::move(density);
    result.selection = std::move(selection);
    result.ratio = static_cast<double>(result.retained_indices.size()) / static_cast<double>(result.n_tokens);
    result.stream_seed = stream_seed;
    return result;
}

/// Density from low-layer keys, IQR outliers of deep attention, density-sized
/// sample of low attention, merge, then aggregation. Sampling uses
/// `opts.selection.seed` directly.
inline CompressionResult compress_subimage(const SubImageBundle& bundle, const CompressOptions& opts = {}) {
    if (bundle.is_global) {
        throw Error(ErrorCode::GlobalImageRejected, "bundle '" + bundle.source.id + "' is the global image");
    }
    bundle.validate();
    opts.selection.validate();

    DensityReport density = compute_density(bundle.keys_low, opts.density);
    IndexSet global = global_select(bundle.attn_deep, opts.selection);
    const std::size_t m = local_sample_count(density.density, bundle.n_tokens());
    IndexSet local = local_select(bundle.attn_low, m, opts.selection);
    SelectionResult selection = merge_indices(std::move(global), std::move(local), bundle.attn_low, opts.selection);
    return finish_compression(bundle, std::move(density), std::move(selection), opts.aggregation,
                              opts.selection.seed);
}

/// The uncompressed whole-document image.
struct GlobalPassthrough {
    TokenMatrix tokens;

    bool operator==(const GlobalPassthrough&) const = default;
};

using DocumentEntry = std::variant<GlobalPassthrough, CompressionResult>;

/// Runs `fn(i)` for i in [0, count) on up to `threads` workers and rethrows
/// the first failure by index.
template <typename Fn>
void parallel_for_each_index(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = std::min(threads, count);
    std::vector<std::exception_ptr> errors(count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Compresses every sub-image independently and passes the global image
/// through. Bundle i samples from the stream derive_stream_seed(seed, i), so
/// results do not depend on thread scheduling.
inline std::vector<DocumentEntry> compress_document(const std::vector<SubImageBundle>& bundles,
                                                    const CompressOptions& opts = {}) {
    const auto n_global = std::count_if(bundles.begin(), bundles.end(), [](const auto& b) { return b.is_global; });
    if (n_global > 1) {
        throw Error(ErrorCode::MultipleGlobalImages,
                    std::to_string(n_global) + " bundles are marked as the global image");
    }
    std::vector<DocumentEntry> entries(bundles.size());
    parallel_for_each_index(bundles.size(), opts.threads, [&](std::size_t i) {
        const SubImageBundle& bundle = bundles[i];
        if (bundle.is_global) {
            bundle.validate();
            entries[i] = GlobalPassthrough{bundle.y_last};
            return;
        }
        CompressOptions local = opts;
        local.selection.seed = derive_stream_seed(opts.selection.seed, i);
        entries[i] = compress_subimage(bundle, local);
    });
    return entries;
}

inline constexpr std::size_t kHistogramBins = 20;
inline constexpr double kHistogramBinWidth = 0.05;

struct RatioSummary {
    std::size_t count = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double mean = 0.0;
    /// Bin b counts ratios in [0.05 b, 0.05 (b + 1)); the last bin is closed.
    std::vector<std::size_t> histogram;
    std::vector<double> ratios;
};

struct CorpusStats {
    /// Keyed by dataset label.
    std::map<std::string, RatioSummary> datasets;
    RatioSummary overall;
};

inline std::size_t histogram_bin(double ratio) {
    // Scale by the bin count rather than dividing by 0.05 so exact multiples
    // of the width land on their own bin.
    const double scaled = ratio * static_cast<double>(kHistogramBins);
    if (!(scaled > 0.0)) {
        return 0;
    }
    return std::min(static_cast<std::size_t>(scaled), kHistogramBins - 1);
}

inline RatioSummary summarize_ratios(std::vector<double> ratios) {
    if (ratios.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "no ratios to summarize");
    }
    RatioSummary s;
    s.count = ratios.size();
    s.histogram.assign(kHistogramBins, 0);
    double total = 0.0;
    for (double r : ratios) {
        total += r;
        ++s.histogram[histogram_bin(r)];
    }
    s.mean = total / static_cast<double>(ratios.size());
    s.ratios = ratios;
    std::sort(ratios.begin(), ratios.end());
    s.min = ratios.front();
    s.max = ratios.back();
    s.q1 = quantile_sorted(ratios, 0.25);
    s.median = quantile_sorted(ratios, 0.5);
    s.q3 = quantile_sorted(ratios, 0.75);
    return s;
}

/// Ratio distributions per dataset label, plus the pooled distribution.
/// Labels may be empty (everything pooled as "all") or one per result.
inline CorpusStats corpus_stats(const std::vector<double>& ratios, const std::vector<std::string>& labels) {
    if (ratios.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "corpus has no compressed sub-images");
    }
    if (!labels.empty() && labels.size() != ratios.size()) {
        throw Error(ErrorCode::DimensionMismatch, std::to_string(labels.size()) + " labels for " +
                                                      std::to_string(ratios.size()) + " results");
    }
    std::map<std::string, std::vector<double>> grouped;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        grouped[labels.empty() ? std::string("all") : labels[i]].push_back(ratios[i]);
    }
    CorpusStats stats;
    for (auto& [label, group] : grouped) {
        stats.datasets.emplace(label, summarize_ratios(std::move(group)));
    }
    stats.overall = summarize_ratios(ratios);
    return stats;
}

inline CorpusStats corpus_stats(const std::vector<CompressionResult>& results,
                                const std::vector<std::string>& labels) {
    std::vector<double> ratios;
    ratios.reserve(results.size());
    for (const auto& r : results) {
        ratios.push_back(r.ratio);
    }
    return corpus_stats(ratios, labels);
}

}  // namespace tokcorr
