// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

// Bundle manifests are JSON documents describing one document's sub-images:
//
//   {
//     "format": "tokcorr-bundle-manifest",
//     "version": 1,
//     "export": { "head_reduction": "mean", "softmax_stage": "post",
//                 "low_layer": 8, "deep_layer": "last" },
//     "sub_images": [
//       { "id": "doc0_r0c0", "dataset": "docvqa", "image_id": "doc0",
//         "crop": [0, 0], "grid": [24, 24], "is_global": false,
//         "y_last": "doc0_r0c0.y_last.tkzt",
//         "keys_low": "...", "attn_low": "...",
//         "keys_deep": "...", "attn_deep": "..." }
//     ]
//   }
//
// Tensor paths are relative to the manifest's directory. A global bundle only
// needs "y_last".

#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokcorr/core.hpp"
#include "tokcorr/io/config.hpp"
#include "tokcorr/io/tensor_file.hpp"
#include "tokcorr/pipeline.hpp"

namespace tokcorr::io {

inline constexpr const char* kManifestFormat = "tokcorr-bundle-manifest";
inline constexpr int kManifestVersion = 1;
inline constexpr double kAttentionSumTolerance = 1e-3;

struct LoadedDocument {
    std::vector<SubImageBundle> bundles;
    /// Free-form notes on how the tensors were exported.
    json export_notes = json::object();
    std::vector<std::string> warnings;
};

namespace detail {

struct LoadedTensor {
    Tensor tensor;
    std::string path;
};

inline LoadedTensor load_tensor(const std::filesystem::path& base, const json& entry, const char* key,
                                const std::string& id) {
    if (!entry.contains(key) || !entry.at(key).is_string()) {
        throw Error(ErrorCode::ParseError, "sub-image '" + id + "' is missing string field '" + key + "'");
    }
    const std::filesystem::path path = base / entry.at(key).get<std::string>();
    return {read_tensor_file(path), path.string()};
}

inline void require_finite_values(const LoadedTensor& t) {
    for (std::size_t i = 0; i < t.tensor.data.size(); ++i) {
        if (!std::isfinite(t.tensor.data[i])) {
            throw Error(ErrorCode::NonFiniteValue, t.path + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

template <typename Tag>
Matrix<Tag> as_matrix(const LoadedTensor& t) {
    if (t.tensor.dims.size() != 2) {
        throw Error(ErrorCode::DimensionMismatch,
                    t.path + ": expected a rank-2 tensor, got rank " + std::to_string(t.tensor.dims.size()));
    }
    require_finite_values(t);
    return Matrix<Tag>(t.tensor.dims[0], t.tensor.dims[1],
                       std::vector<double>(t.tensor.data.begin(), t.tensor.data.end()));
}

inline KeyMatrix as_keys(const LoadedTensor& t) {
    KeyMatrix keys = as_matrix<KeyTag>(t);
    for (std::size_t i = 0; i < keys.rows(); ++i) {
        if (!(l2_norm(keys.row(i)) >= kZeroNormThreshold)) {
            throw Error(ErrorCode::ZeroKeyRow, t.path + ": key row " + std::to_string(i) + " is zero");
        }
    }
    return keys;
}

inline AttentionVector as_attention(const LoadedTensor& t, std::vector<std::string>& warnings) {
    if (t.tensor.dims.size() != 1) {
        throw Error(ErrorCode::DimensionMismatch,
                    t.path + ": expected a rank-1 tensor, got rank " + std::to_string(t.tensor.dims.size()));
    }
    require_finite_values(t);
    bool any_positive = false;
    for (std::size_t i = 0; i < t.tensor.data.size(); ++i) {
        if (t.tensor.data[i] < 0.0f) {
            throw Error(ErrorCode::InvalidAttention, t.path + ": negative score at index " + std::to_string(i));
        }
        any_positive = any_positive || t.tensor.data[i] > 0.0f;
    }
    if (!any_positive) {
        throw Error(ErrorCode::InvalidAttention, t.path + ": all scores are zero");
    }
    AttentionVector attn(std::vector<double>(t.tensor.data.begin(), t.tensor.data.end()));
    const double sum = attn.sum();
    if (std::abs(sum - 1.0) > kAttentionSumTolerance) {
        warnings.push_back(t.path + ": attention sums to " + json(sum).dump() + ", not 1");
    }
    return attn;
}

inline void require_same_length(std::size_t a, const std::string& path_a, std::size_t b, const std::string& path_b) {
    if (a != b) {
        throw Error(ErrorCode::DimensionMismatch, path_a + " has " + std::to_string(a) + " tokens but " + path_b +
                                                      " has " + std::to_string(b));
    }
}

inline bool valid_id(const std::string& id) {
    if (id.empty() || id == "." || id == "..") {
        return false;
    }
    return id.find_first_of("/\\") == std::string::npos;
}

}  // namespace detail

/// Parses the manifest and every tensor it references, validating shapes,
/// finiteness, key rows and attention vectors.
inline LoadedDocument load_bundle(const std::filesystem::path& manifest_path) {
    const json manifest = read_json_file(manifest_path);
    const std::filesystem::path base = manifest_path.parent_path();
    const std::string where = manifest_path.string();

    if (!manifest.is_object() || !manifest.contains("sub_images") || !manifest.at("sub_images").is_array()) {
        throw Error(ErrorCode::ParseError, where + ": expected an object with a 'sub_images' array");
    }
    if (manifest.contains("version") && manifest.at("version") != kManifestVersion) {
        throw Error(ErrorCode::UnsupportedVersion, where + ": manifest version " + manifest.at("version").dump());
    }

    LoadedDocument doc;
    if (manifest.contains("export")) {
        doc.export_notes = manifest.at("export");
    }
    std::set<std::string> seen_ids;
    std::size_t n_global = 0;
    const json& entries = manifest.at("sub_images");
    for (std::size_t idx = 0; idx < entries.size(); ++idx) {
        const json& e = entries.at(idx);
        if (!e.is_object()) {
            throw Error(ErrorCode::ParseError, where + ": sub_images[" + std::to_string(idx) + "] is not an object");
        }
        SubImageBundle b;
        try {
            b.source.id = e.value("id", "sub" + std::to_string(idx));
            b.source.dataset = e.value("dataset", std::string("default"));
            b.source.image_id = e.value("image_id", std::string());
            if (e.contains("crop")) {
                b.source.crop_row = e.at("crop").at(0).get<std::size_t>();
                b.source.crop_col = e.at("crop").at(1).get<std::size_t>();
            }
            b.is_global = e.value("is_global", false);
            if (!e.contains("grid")) {
                throw Error(ErrorCode::ParseError, where + ": sub-image '" + b.source.id + "' has no grid");
            }
            b.grid.rows = e.at("grid").at(0).get<std::size_t>();
            b.grid.cols = e.at("grid").at(1).get<std::size_t>();
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::ParseError, where + ": sub_images[" + std::to_string(idx) + "]: " + ex.what());
        }
        if (!detail::valid_id(b.source.id) || !seen_ids.insert(b.source.id).second) {
            throw Error(ErrorCode::ParseError, where + ": invalid or duplicate id '" + b.source.id + "'");
        }
        n_global += b.is_global ? 1 : 0;
        if (n_global > 1) {
            throw Error(ErrorCode::MultipleGlobalImages, where + ": more than one sub-image has is_global=true");
        }

        const auto y = detail::load_tensor(base, e, "y_last", b.source.id);
        b.y_last = detail::as_matrix<TokenTag>(y);
        if (b.y_last.rows() == 0 || b.y_last.cols() == 0) {
            throw Error(ErrorCode::DimensionMismatch, y.path + ": empty token matrix");
        }
        if (!b.is_global) {
            const auto kl = detail::load_tensor(base, e, "keys_low", b.source.id);
            const auto al = detail::load_tensor(base, e, "attn_low", b.source.id);
            const auto kd = detail::load_tensor(base, e, "keys_deep", b.source.id);
            const auto ad = detail::load_tensor(base, e, "attn_deep", b.source.id);
            b.keys_low = detail::as_keys(kl);
            b.keys_deep = detail::as_keys(kd);
            b.attn_low = detail::as_attention(al, doc.warnings);
            b.attn_deep = detail::as_attention(ad, doc.warnings);
            detail::require_same_length(b.keys_low.rows(), kl.path, b.y_last.rows(), y.path);
            detail::require_same_length(b.attn_low.size(), al.path, b.keys_low.rows(), kl.path);
            detail::require_same_length(b.keys_deep.rows(), kd.path, b.y_last.rows(), y.path);
            detail::require_same_length(b.attn_deep.size(), ad.path, b.keys_deep.rows(), kd.path);
        }
        if (b.grid.cells() != b.y_last.rows()) {
            throw Error(ErrorCode::GridMismatch, where + ": sub-image '" + b.source.id + "' grid " +
                                                     std::to_string(b.grid.rows) + "x" + std::to_string(b.grid.cols) +
                                                     " does not match " + std::to_string(b.y_last.rows()) + " tokens");
        }
        doc.bundles.push_back(std::move(b));
    }
    return doc;
}

/// Writes every bundle as TKZT tensors next to a manifest at `manifest_path`.
inline void write_bundle(const std::filesystem::path& manifest_path,
                         const std::vector<SubImageBundle>& bundles,
                         const json& export_notes = json::object()) {
    const std::filesystem::path base = manifest_path.parent_path();
    if (!base.empty()) {
        std::filesystem::create_directories(base);
    }
    json list = json::array();
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const SubImageBundle& b = bundles[i];
        const std::string id = b.source.id.empty() ? "sub" + std::to_string(i) : b.source.id;
        json e = {
            {"id", id},
            {"dataset", b.source.dataset.empty() ? std::string("default") : b.source.dataset},
            {"image_id", b.source.image_id},
            {"crop", {b.source.crop_row, b.source.crop_col}},
            {"grid", {b.grid.rows, b.grid.cols}},
            {"is_global", b.is_global},
        };
        const auto put = [&](const char* key, const Tensor& t) {
            const std::string file = id + "." + key + ".tkzt";
            write_tensor_file(base / file, t);
            e[key] = file;
        };
        put("y_last", to_tensor(b.y_last));
        if (!b.is_global) {
            put("keys_low", to_tensor(b.keys_low));
            put("attn_low", to_tensor(b.attn_low));
            put("keys_deep", to_tensor(b.keys_deep));
            put("attn_deep", to_tensor(b.attn_deep));
        }
        list.push_back(std::move(e));
    }
    json manifest = {
        {"format", kManifestFormat},
        {"version", kManifestVersion},
        {"export", export_notes},
        {"sub_images", std::move(list)},
    };
    write_json_file(manifest_path, manifest);
}

}  // namespace tokcorr::io
