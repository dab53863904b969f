// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tokcorr/tokcorr.hpp"

namespace tokcorr::cli {

namespace fs = std::filesystem;
using io::json;

inline constexpr const char* kToolVersion = "0.1.0";

struct CommonOptions {
    std::string manifest;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
};

inline CompressOptions effective_options(const CommonOptions& common) {
    CompressOptions opts;
    if (!common.config.empty()) {
        io::apply_options_json(io::read_json_file(common.config), opts);
    }
    if (common.seed) {
        opts.selection.seed = *common.seed;
    }
    opts.threads = common.threads;
    return opts;
}

inline void print_warnings(const io::LoadedDocument& doc) {
    for (const auto& w : doc.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
}

inline json run_info(const std::string& method, const std::string& manifest) {
    return {{"tool", "tokcorr"}, {"tool_version", kToolVersion}, {"method", method}, {"manifest", manifest}};
}

inline void print_ratio_line(const std::vector<SubImageBundle>& bundles, const std::vector<DocumentEntry>& entries) {
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        if (const auto* r = std::get_if<CompressionResult>(&entries[i])) {
            std::cout << bundles[i].source.id << ": " << r->retained_indices.size() << "/" << r->n_tokens
                      << " tokens (ratio " << r->ratio << ", density " << r->density_report.density << ")\n";
        } else {
            std::cout << bundles[i].source.id << ": global image kept (" << bundles[i].n_tokens() << " tokens)\n";
        }
    }
}

inline int run_compress(const CommonOptions& common, const std::string& out) {
    const CompressOptions opts = effective_options(common);
    const io::LoadedDocument doc = io::load_bundle(common.manifest);
    print_warnings(doc);
    const auto entries = compress_document(doc.bundles, opts);
    io::write_results(out, doc.bundles, entries, opts, run_info("adaptive", common.manifest), doc.export_notes);
    print_ratio_line(doc.bundles, entries);
    return 0;
}

inline int run_baseline(const CommonOptions& common, const std::string& out, const std::string& method, double ratio) {
    harness::Baseline baseline;
    if (method == "random") {
        baseline.method = harness::BaselineMethod::Random;
    } else if (method == "uniform") {
        baseline.method = harness::BaselineMethod::Uniform;
    } else if (method == "fixed") {
        baseline.method = harness::BaselineMethod::FixedRatio;
        baseline.ratio = ratio;
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown baseline method '" + method + "'");
    }
    const CompressOptions opts = effective_options(common);
    const io::LoadedDocument doc = io::load_bundle(common.manifest);
    print_warnings(doc);
    const auto entries = harness::baseline_document(baseline, doc.bundles, opts);
    json info = run_info("baseline-" + method, common.manifest);
    if (baseline.method == harness::BaselineMethod::FixedRatio) {
        info["fixed_ratio"] = ratio;
    }
    io::write_results(out, doc.bundles, entries, opts, info, doc.export_notes);
    print_ratio_line(doc.bundles, entries);
    return 0;
}

inline int run_density(const CommonOptions& common, std::optional<double> alpha, std::optional<std::size_t> limit_k,
                       bool count_self) {
    CompressOptions opts = effective_options(common);
    if (alpha) {
        opts.density.alpha = *alpha;
    }
    if (limit_k) {
        opts.density.limit_k = *limit_k;
    }
    opts.density.count_self = opts.density.count_self || count_self;
    opts.density.validate();
    const io::LoadedDocument doc = io::load_bundle(common.manifest);
    print_warnings(doc);
    std::cout << "# alpha=" << opts.density.alpha << " limit_k=" << opts.density.limit_k
              << " count_self=" << (opts.density.count_self ? "true" : "false") << '\n';
    std::cout << "id\tn_tokens\tn_redundant\tredundancy\tdensity\n";
    for (const auto& b : doc.bundles) {
        if (b.is_global) {
            continue;
        }
        const DensityReport r = compute_density(b.keys_low, opts.density);
        std::cout << b.source.id << '\t' << b.n_tokens() << '\t' << r.n_redundant << '\t' << r.redundancy << '\t'
                  << r.density << '\n';
    }
    return 0;
}

inline int run_stats(const std::vector<std::string>& results, const std::vector<std::string>& labels,
                     const std::string& out) {
    if (!labels.empty() && labels.size() != results.size()) {
        throw Error(ErrorCode::InvalidConfig, "--labels needs one label per --results entry");
    }
    std::vector<double> ratios;
    std::vector<std::string> dataset;
    for (std::size_t f = 0; f < results.size(); ++f) {
        for (const auto& rec : io::load_results(results[f])) {
            if (rec.is_global) {
                continue;
            }
            ratios.push_back(rec.ratio);
            dataset.push_back(labels.empty() ? rec.source.dataset : labels[f]);
        }
    }
    const CorpusStats stats = corpus_stats(ratios, dataset);
    fs::create_directories(out);
    json doc = io::stats_to_json(stats);
    doc["inputs"] = results;
    io::write_json_file(fs::path(out) / "stats.json", doc);
    io::write_file_bytes(fs::path(out) / "histogram.csv", [&] {
        const std::string s = io::histogram_csv(stats);
        return std::vector<std::uint8_t>(s.begin(), s.end());
    }());
    io::write_file_bytes(fs::path(out) / "boxplot.csv", [&] {
        const std::string s = io::boxplot_csv(stats);
        return std::vector<std::uint8_t>(s.begin(), s.end());
    }());
    std::cout << io::boxplot_csv(stats);
    return 0;
}

inline int run_masks(const std::string& manifest, const std::string& results, const std::string& out,
                     std::size_t scale) {
    const io::LoadedDocument doc = io::load_bundle(manifest);
    std::map<std::string, const SubImageBundle*> by_id;
    for (const auto& b : doc.bundles) {
        by_id[b.source.id] = &b;
    }
    std::size_t written = 0;
    for (const auto& rec : io::load_results(results)) {
        if (rec.is_global) {
            continue;
        }
        const auto it = by_id.find(rec.source.id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::ParseError, "results mention '" + rec.source.id + "' which the manifest lacks");
        }
        if (it->second->grid != rec.grid) {
            throw Error(ErrorCode::GridMismatch, "grid of '" + rec.source.id + "' differs between manifest and results");
        }
        const auto masks = io::render_masks(it->second->grid, rec.redundant_mask, rec.retained_indices,
                                            rec.provenance, scale);
        io::write_masks(masks, out, rec.source.id);
        ++written;
    }
    std::cout << "wrote masks for " << written << " sub-images to " << out << '\n';
    return 0;
}

inline int run_selftest(std::uint64_t seed, std::size_t instances, bool as_json) {
    const auto report = harness::oracle_suite(seed, instances);
    if (as_json) {
        std::cout << report.to_json().dump(2) << '\n';
    } else {
        std::cout << report.to_text();
    }
    return report.all_passed() ? 0 : 1;
}

struct SynthOptions {
    std::string out;
    std::size_t count = 1;
    bool with_global = false;
    bool hand_trace = false;
    std::string dataset = "synthetic";
    std::string profile = "concentrated";
    harness::SyntheticSpec spec;
};

/// Writes a manifest of synthetic sub-images (optionally with a global image).
inline int run_synth(SynthOptions o) {
    if (o.profile == "uniform") {
        o.spec.attention_profile = harness::AttentionProfile::Uniform;
    } else if (o.profile == "concentrated") {
        o.spec.attention_profile = harness::AttentionProfile::ConcentratedOnUnique;
    } else if (o.profile == "outliers") {
        o.spec.attention_profile = harness::AttentionProfile::WithOutliers;
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown attention profile '" + o.profile + "'");
    }
    std::vector<SubImageBundle> bundles;
    if (o.hand_trace) {
        bundles.push_back(harness::hand_trace_bundle());
    } else {
        for (std::size_t i = 0; i < o.count; ++i) {
            harness::SyntheticSpec spec = o.spec;
            spec.seed = derive_stream_seed(o.spec.seed, i);
            SubImageBundle b = harness::generate(spec).bundle;
            b.source.id = "sub" + std::to_string(i);
            b.source.dataset = o.dataset;
            b.source.image_id = "doc0";
            b.source.crop_row = i / 2;
            b.source.crop_col = i % 2;
            bundles.push_back(std::move(b));
        }
    }
    if (o.with_global) {
        SubImageBundle g;
        g.is_global = true;
        g.source = {"global", o.dataset, "doc0", 0, 0};
        g.y_last = bundles.front().y_last;
        g.grid = bundles.front().grid;
        bundles.insert(bundles.begin(), std::move(g));
    }
    const json notes = {{"generator", "tokcorr synth"}, {"head_reduction", "none (synthetic)"},
                        {"softmax_stage", "post"}, {"low_layer", 8}, {"deep_layer", "last"}};
    io::write_bundle(o.out, bundles, notes);
    std::cout << "wrote " << bundles.size() << " bundles to " << o.out << '\n';
    return 0;
}

}  // namespace tokcorr::cli
