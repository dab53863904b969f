// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

// Compress one synthetic sub-image and print what each stage decided.

#include <iostream>

#include "tokcorr/tokcorr.hpp"

int main() {
    tokcorr::harness::SyntheticSpec spec;
    spec.n_tokens = 256;
    spec.dim = 200;
    spec.redundancy_fraction = 0.6;
    spec.n_clusters = 2;
    spec.attention_profile = tokcorr::harness::AttentionProfile::ConcentratedOnUnique;
    spec.seed = 7;
    const auto synthetic = tokcorr::harness::generate(spec);

    tokcorr::CompressOptions opts;  // alpha 0.7, limit_k 50, knn_k 3
    const auto result = tokcorr::compress_subimage(synthetic.bundle, opts);

    std::cout << "density          " << result.density_report.density << '\n'
              << "global outliers  " << result.selection.global_indices.size() << '\n'
              << "local samples    " << result.selection.local_indices.size() << '\n'
              << "retained tokens  " << result.retained_indices.size() << " of " << result.n_tokens << '\n'
              << "ratio            " << result.ratio << '\n'
              << "compressed shape " << result.compressed_tokens.rows() << "x" << result.compressed_tokens.cols()
              << '\n';
}
