// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

// Output tree of a compression run:
//
//   <out>/results.json          run config + one summary row per sub-image
//   <out>/<id>.tokens.tkzt      compressed tokens (global image: passthrough)
//   <out>/<id>.meta.json        per-sub-image density, branches, indices
//
// All JSON is written with sorted keys so identical runs are byte-identical.

#pragma once

#include <cstddef>
#include <filesystem>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "tokcorr/core.hpp"
#include "tokcorr/io/config.hpp"
#include "tokcorr/io/manifest.hpp"
#include "tokcorr/io/tensor_file.hpp"
#include "tokcorr/pipeline.hpp"

namespace tokcorr::io {

inline constexpr const char* kResultsFormat = "tokcorr-results";
inline constexpr int kResultsVersion = 1;
inline constexpr const char* kResultsFileName = "results.json";

struct BranchCounts {
    std::size_t global = 0;
    std::size_t local = 0;
    std::size_t both = 0;
    std::size_t fallback = 0;
};

inline BranchCounts count_branches(const std::vector<Provenance>& tags) {
    BranchCounts c;
    for (Provenance p : tags) {
        switch (p) {
        case Provenance::Global: ++c.global; break;
        case Provenance::Local: ++c.local; break;
        case Provenance::Both: ++c.both; break;
        case Provenance::Fallback: ++c.fallback; break;
        }
    }
    return c;
}

inline Provenance provenance_from_string(const std::string& s) {
    if (s == "global") return Provenance::Global;
    if (s == "local") return Provenance::Local;
    if (s == "both") return Provenance::Both;
    if (s == "fallback") return Provenance::Fallback;
    throw Error(ErrorCode::ParseError, "unknown provenance tag '" + s + "'");
}

inline json result_to_json(const SubImageBundle& bundle, const CompressionResult& r) {
    const BranchCounts counts = count_branches(r.branch_provenance);
    std::vector<std::string> tags;
    tags.reserve(r.branch_provenance.size());
    for (Provenance p : r.branch_provenance) {
        tags.emplace_back(to_string(p));
    }
    std::vector<int> mask;
    mask.reserve(r.density_report.redundant_mask.size());
    for (bool b : r.density_report.redundant_mask) {
        mask.push_back(b ? 1 : 0);
    }
    return {
        {"id", bundle.source.id},
        {"dataset", bundle.source.dataset},
        {"grid", {bundle.grid.rows, bundle.grid.cols}},
        {"n_tokens", r.n_tokens},
        {"n_retained", r.retained_indices.size()},
        {"ratio", r.ratio},
        {"density", r.density_report.density},
        {"redundancy", r.density_report.redundancy},
        {"n_redundant", r.density_report.n_redundant},
        {"redundant_mask", mask},
        {"branch_counts",
         {{"global", counts.global}, {"local", counts.local}, {"both", counts.both}, {"fallback", counts.fallback}}},
        {"global_indices", r.selection.global_indices},
        {"local_indices", r.selection.local_indices},
        {"retained_indices", r.retained_indices},
        {"provenance", tags},
        {"stream_seed", r.stream_seed},
    };
}

/// Writes the full output tree for a document. `run_info` is embedded
/// verbatim (method, manifest name, and so on) next to the effective config.
inline void write_results(const std::filesystem::path& out_dir,
                          const std::vector<SubImageBundle>& bundles,
                          const std::vector<DocumentEntry>& entries,
                          const CompressOptions& opts,
                          const json& run_info,
                          const json& export_notes = json::object()) {
    if (bundles.size() != entries.size()) {
        throw Error(ErrorCode::DimensionMismatch, "bundle and result counts differ");
    }
    std::filesystem::create_directories(out_dir);
    const json config = options_to_json(opts);
    json rows = json::array();
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const SubImageBundle& b = bundles[i];
        const std::string tokens_file = b.source.id + ".tokens.tkzt";
        json row = {
            {"id", b.source.id},
            {"dataset", b.source.dataset},
            {"image_id", b.source.image_id},
            {"crop", {b.source.crop_row, b.source.crop_col}},
            {"grid", {b.grid.rows, b.grid.cols}},
            {"is_global", b.is_global},
            {"n_tokens", b.n_tokens()},
            {"tokens_file", tokens_file},
        };
        if (const auto* g = std::get_if<GlobalPassthrough>(&entries[i])) {
            write_tensor_file(out_dir / tokens_file, to_tensor(g->tokens));
            row["n_retained"] = b.n_tokens();
            row["ratio"] = 1.0;
        } else {
            const auto& r = std::get<CompressionResult>(entries[i]);
            write_tensor_file(out_dir / tokens_file, to_tensor(r.compressed_tokens));
            const std::string meta_file = b.source.id + ".meta.json";
            json meta = result_to_json(b, r);
            meta["config"] = config;
            meta["run"] = run_info;
            write_json_file(out_dir / meta_file, meta);
            row["meta_file"] = meta_file;
            row["n_retained"] = r.retained_indices.size();
            row["ratio"] = r.ratio;
            row["density"] = r.density_report.density;
        }
        rows.push_back(std::move(row));
    }
    json doc = {
        {"format", kResultsFormat},
        {"version", kResultsVersion},
        {"config", config},
        {"run", run_info},
        {"export", export_notes},
        {"sub_images", std::move(rows)},
    };
    write_json_file(out_dir / kResultsFileName, doc);
}

/// One compressed sub-image as read back from an output tree.
struct ResultRecord {
    SourceInfo source;
    GridShape grid;
    bool is_global = false;
    std::size_t n_tokens = 0;
    double ratio = 1.0;
    IndexSet retained_indices;
    std::vector<Provenance> provenance;
    std::vector<bool> redundant_mask;
};

/// Reads `results.json` (or a directory holding one) and each meta file.
inline std::vector<ResultRecord> load_results(std::filesystem::path path) {
    if (std::filesystem::is_directory(path)) {
        path /= kResultsFileName;
    }
    const json doc = read_json_file(path);
    const std::filesystem::path base = path.parent_path();
    std::vector<ResultRecord> out;
    try {
        if (doc.at("format") != kResultsFormat) {
            throw Error(ErrorCode::ParseError, path.string() + ": not a results document");
        }
        for (const json& row : doc.at("sub_images")) {
            ResultRecord rec;
            rec.source.id = row.at("id").get<std::string>();
            rec.source.dataset = row.at("dataset").get<std::string>();
            rec.source.image_id = row.value("image_id", std::string());
            rec.grid.rows = row.at("grid").at(0).get<std::size_t>();
            rec.grid.cols = row.at("grid").at(1).get<std::size_t>();
            rec.is_global = row.at("is_global").get<bool>();
            rec.n_tokens = row.at("n_tokens").get<std::size_t>();
            rec.ratio = row.at("ratio").get<double>();
            if (!rec.is_global) {
                const json meta = read_json_file(base / row.at("meta_file").get<std::string>());
                rec.retained_indices = meta.at("retained_indices").get<IndexSet>();
                for (const auto& tag : meta.at("provenance")) {
                    rec.provenance.push_back(provenance_from_string(tag.get<std::string>()));
                }
                for (const auto& bit : meta.at("redundant_mask")) {
                    rec.redundant_mask.push_back(bit.get<int>() != 0);
                }
            }
            out.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return out;
}

inline json summary_to_json(const RatioSummary& s) {
    return {
        {"count", s.count}, {"min", s.min},   {"q1", s.q1},       {"median", s.median},
        {"q3", s.q3},       {"max", s.max},   {"mean", s.mean},   {"histogram", s.histogram},
        {"ratios", s.ratios},
    };
}

inline json stats_to_json(const CorpusStats& stats) {
    json datasets = json::object();
    for (const auto& [label, s] : stats.datasets) {
        datasets[label] = summary_to_json(s);
    }
    return {
        {"format", "tokcorr-corpus-stats"},
        {"version", 1},
        {"histogram_bin_width", kHistogramBinWidth},
        {"datasets", datasets},
        {"overall", summary_to_json(stats.overall)},
    };
}

/// CSV rows "dataset,bin_lo,bin_hi,count" for every dataset and bin.
inline std::string histogram_csv(const CorpusStats& stats) {
    std::ostringstream out;
    out << "dataset,bin_lo,bin_hi,count\n";
    for (const auto& [label, s] : stats.datasets) {
        for (std::size_t b = 0; b < s.histogram.size(); ++b) {
            out << label << ',' << json(static_cast<double>(b) / static_cast<double>(kHistogramBins)).dump() << ','
                << json(static_cast<double>(b + 1) / static_cast<double>(kHistogramBins)).dump() << ',' << s.histogram[b] << '\n';
        }
    }
    return out.str();
}

/// CSV rows "dataset,count,min,q1,median,q3,max,mean" for box plots.
inline std::string boxplot_csv(const CorpusStats& stats) {
    std::ostringstream out;
    out << "dataset,count,min,q1,median,q3,max,mean\n";
    const auto num = [](double v) { return json(v).dump(); };
    for (const auto& [label, s] : stats.datasets) {
        out << label << ',' << s.count << ',' << num(s.min) << ',' << num(s.q1) << ',' << num(s.median) << ','
            << num(s.q3) << ',' << num(s.max) << ',' << num(s.mean) << '\n';
    }
    return out.str();
}

}  // namespace tokcorr::io
