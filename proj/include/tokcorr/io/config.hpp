// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "tokcorr/core.hpp"
#include "tokcorr/pipeline.hpp"

namespace tokcorr::io {

using json = nlohmann::json;

inline std::string key_source_name(KeySource s) {
    return s == KeySource::Deep ? "deep" : "low";
}

/// The full effective configuration; written into every output document.
inline json options_to_json(const CompressOptions& opts) {
    json j;
    j["density"] = {
        {"alpha", opts.density.alpha},
        {"limit_k", opts.density.limit_k},
        {"count_self", opts.density.count_self},
    };
    j["selection"] = {
        {"iqr_factor", opts.selection.iqr_factor},
        {"quantile_method", "linear"},
        {"min_retained", opts.selection.min_retained},
        {"seed", opts.selection.seed},
        {"stream_derivation", "splitmix64(seed ^ splitmix64(bundle_index + 0x632BE59BD9B4E019))"},
        {"sampler", "sequential-renormalized"},
    };
    j["aggregation"] = {
        {"knn_k", opts.aggregation.knn_k},
        {"include_self", opts.aggregation.include_self},
        {"normalize_weights", opts.aggregation.normalize_weights},
        {"key_source", key_source_name(opts.aggregation.key_source)},
    };
    return j;
}

namespace detail {

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, where + "." + key + ": " + e.what());
    }
}

}  // namespace detail

/// Overlays the fields present in `j` onto `opts`; absent fields keep their
/// current values.
inline void apply_options_json(const json& j, CompressOptions& opts) {
    if (!j.is_object()) {
        throw Error(ErrorCode::ParseError, "config must be a JSON object");
    }
    if (j.contains("density")) {
        const json& d = j.at("density");
        detail::read_field(d, "alpha", opts.density.alpha, "density");
        detail::read_field(d, "limit_k", opts.density.limit_k, "density");
        detail::read_field(d, "count_self", opts.density.count_self, "density");
    }
    if (j.contains("selection")) {
        const json& s = j.at("selection");
        detail::read_field(s, "iqr_factor", opts.selection.iqr_factor, "selection");
        detail::read_field(s, "min_retained", opts.selection.min_retained, "selection");
        detail::read_field(s, "seed", opts.selection.seed, "selection");
        if (s.contains("quantile_method") && s.at("quantile_method") != "linear") {
            throw Error(ErrorCode::InvalidConfig, "unknown quantile_method " + s.at("quantile_method").dump());
        }
    }
    if (j.contains("aggregation")) {
        const json& a = j.at("aggregation");
        detail::read_field(a, "knn_k", opts.aggregation.knn_k, "aggregation");
        detail::read_field(a, "include_self", opts.aggregation.include_self, "aggregation");
        detail::read_field(a, "normalize_weights", opts.aggregation.normalize_weights, "aggregation");
        if (a.contains("key_source")) {
            const std::string src = a.at("key_source").get<std::string>();
            if (src == "deep") {
                opts.aggregation.key_source = KeySource::Deep;
            } else if (src == "low") {
                opts.aggregation.key_source = KeySource::Low;
            } else {
                throw Error(ErrorCode::InvalidConfig, "key_source must be 'deep' or 'low', got '" + src + "'");
            }
        }
    }
    if (j.contains("threads")) {
        detail::read_field(j, "threads", opts.threads, "config");
    }
    opts.density.validate();
    opts.selection.validate();
    opts.aggregation.validate();
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

/// Pretty-printed with sorted keys and a trailing newline.
inline void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

}  // namespace tokcorr::io
