// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

void add_common(CLI::App* cmd, tokcorr::cli::CommonOptions& common, bool with_seed) {
    cmd->add_option("--manifest", common.manifest, "Bundle manifest (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--config", common.config, "Configuration file (JSON)")->check(CLI::ExistingFile);
    if (with_seed) {
        cmd->add_option("--seed", common.seed, "Sampling seed");
        cmd->add_option("--threads", common.threads, "Worker threads (0 = all cores)");
    }
}

}  // namespace

int main(int argc, char** argv) {
    using namespace tokcorr::cli;

    CLI::App app{"Correlation-guided visual token compression"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommonOptions compress_opts;
    std::string compress_out;
    auto* compress = app.add_subcommand("compress", "Compress every sub-image of a manifest");
    add_common(compress, compress_opts, true);
    compress->add_option("--out", compress_out, "Output directory")->required();

    CommonOptions density_opts;
    std::optional<double> alpha;
    std::optional<std::size_t> limit_k;
    bool count_self = false;
    auto* density = app.add_subcommand("density", "Report information density per sub-image");
    add_common(density, density_opts, false);
    density->add_option("--alpha", alpha, "Similarity threshold (default 0.7)");
    density->add_option("--limit-k", limit_k, "Similar-token limit (default 50)");
    density->add_flag("--count-self", count_self, "Count each token as its own similar peer");

    std::vector<std::string> stats_results;
    std::vector<std::string> stats_labels;
    std::string stats_out;
    auto* stats = app.add_subcommand("stats", "Compression-ratio statistics over result directories");
    stats->add_option("--results", stats_results, "results.json files or output directories")->required();
    stats->add_option("--labels", stats_labels, "Dataset label per --results entry");
    stats->add_option("--out", stats_out, "Output directory")->required();

    std::string masks_manifest;
    std::string masks_results;
    std::string masks_out;
    std::size_t masks_scale = 1;
    auto* masks = app.add_subcommand("masks", "Render redundancy and selection masks as PGM");
    masks->add_option("--manifest", masks_manifest, "Bundle manifest (JSON)")->required()->check(CLI::ExistingFile);
    masks->add_option("--results", masks_results, "results.json or output directory")->required();
    masks->add_option("--out", masks_out, "Output directory")->required();
    masks->add_option("--scale", masks_scale, "Pixels per patch")->check(CLI::PositiveNumber);

    CommonOptions baseline_opts;
    std::string baseline_method;
    double baseline_ratio = 0.5;
    std::string baseline_out;
    auto* baseline = app.add_subcommand("baseline", "Compress with a baseline token selection");
    add_common(baseline, baseline_opts, true);
    baseline->add_option("--method", baseline_method, "random | uniform | fixed")
        ->required()
        ->check(CLI::IsMember({"random", "uniform", "fixed"}));
    baseline->add_option("--ratio", baseline_ratio, "Retention ratio for --method fixed")->check(CLI::Range(0.0, 1.0));
    baseline->add_option("--out", baseline_out, "Output directory")->required();

    std::uint64_t selftest_seed = tokcorr::harness::kDefaultSuiteSeed;
    std::size_t selftest_instances = 200;
    bool selftest_json = false;
    auto* selftest = app.add_subcommand("selftest", "Run the oracle-equivalence suite");
    selftest->add_option("--seed", selftest_seed, "Suite seed");
    selftest->add_option("--instances", selftest_instances, "Random instances per oracle");
    selftest->add_flag("--json", selftest_json, "Emit the report as JSON");

    SynthOptions synth_opts;
    auto* synth = app.add_subcommand("synth", "Write a manifest of synthetic sub-images");
    synth->add_option("--out", synth_opts.out, "Manifest path to write")->required();
    synth->add_option("--count", synth_opts.count, "Number of sub-images");
    synth->add_option("--n", synth_opts.spec.n_tokens, "Tokens per sub-image");
    synth->add_option("--dim", synth_opts.spec.dim, "Key dimension");
    synth->add_option("--rho", synth_opts.spec.redundancy_fraction, "Redundant fraction")->check(CLI::Range(0.0, 1.0));
    synth->add_option("--clusters", synth_opts.spec.n_clusters, "Clusters of redundant tokens");
    synth->add_option("--profile", synth_opts.profile, "uniform | concentrated | outliers");
    synth->add_option("--outliers", synth_opts.spec.outlier_count, "Deep-attention outliers (profile outliers)");
    synth->add_option("--seed", synth_opts.spec.seed, "Generator seed");
    synth->add_option("--dataset", synth_opts.dataset, "Dataset label");
    synth->add_flag("--global", synth_opts.with_global, "Prepend a global image bundle");
    synth->add_flag("--hand-trace", synth_opts.hand_trace, "Write the fixed 4x4 hand-trace bundle instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const auto parsed = app.get_subcommands();
        const CLI::App* target = parsed.empty() ? &app : parsed.front();
        std::cerr << "error: Usage: " << e.what() << '\n' << target->help();
        return 2;
    }

    try {
        if (*compress) {
            return run_compress(compress_opts, compress_out);
        }
        if (*density) {
            return run_density(density_opts, alpha, limit_k, count_self);
        }
        if (*stats) {
            return run_stats(stats_results, stats_labels, stats_out);
        }
        if (*masks) {
            return run_masks(masks_manifest, masks_results, masks_out, masks_scale);
        }
        if (*baseline) {
            return run_baseline(baseline_opts, baseline_out, baseline_method, baseline_ratio);
        }
        if (*selftest) {
            return run_selftest(selftest_seed, selftest_instances, selftest_json);
        }
        if (*synth) {
            return run_synth(synth_opts);
        }
    } catch (const tokcorr::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
