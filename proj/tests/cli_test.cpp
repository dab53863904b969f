// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "tokcorr/io/config.hpp"
#include "tokcorr/io/results.hpp"
#include "tokcorr/io/tensor_file.hpp"

namespace {

namespace fs = std::filesystem;
using tokcorr::io::json;

struct RunResult {
    int exit_code = -1;
    std::string out;
};

/// Runs the CLI with `args`, capturing stdout (and stderr when merged).
RunResult run_cli(const std::string& args, bool merge_stderr = false) {
    std::string cmd = std::string(TOKCORR_CLI_PATH) + " " + args;
    cmd += merge_stderr ? " 2>&1" : " 2>/dev/null";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) {
        return r;
    }
    char buf[4096];
    std::size_t got = 0;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) {
        r.out.append(buf, got);
    }
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("tokcorr_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }

    std::string manifest(const std::string& extra = "--count 3 --rho 0.5") {
        const fs::path m = dir / "in" / "manifest.json";
        const auto r = run_cli("synth --out " + m.string() + " " + extra);
        EXPECT_EQ(r.exit_code, 0) << r.out;
        return m.string();
    }

    static std::map<std::string, std::string> tree(const fs::path& root) {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (e.is_regular_file()) {
                std::ifstream in(e.path(), std::ios::binary);
                std::ostringstream s;
                s << in.rdbuf();
                files[fs::relative(e.path(), root).string()] = s.str();
            }
        }
        return files;
    }

    fs::path dir;
};

TEST_F(Cli, CompressIsByteDeterministic) {
    const std::string m = manifest("--count 4 --rho 0.6 --n 64 --dim 72 --global");
    ASSERT_EQ(run_cli("compress --manifest " + m + " --out " + (dir / "a").string() + " --seed 7").exit_code, 0);
    ASSERT_EQ(run_cli("compress --manifest " + m + " --out " + (dir / "b").string() + " --seed 7 --threads 3")
                  .exit_code,
              0);
    const auto a = tree(dir / "a");
    EXPECT_EQ(a.size(), 1u + 1u + 2u * 4u);
    EXPECT_EQ(a, tree(dir / "b"));
}

TEST_F(Cli, CompressEmbedsTheEffectiveConfig) {
    const std::string m = manifest();
    std::ofstream(dir / "cfg.json") << R"({"density": {"limit_k": 5}})";
    ASSERT_EQ(run_cli("compress --manifest " + m + " --config " + (dir / "cfg.json").string() + " --out " +
                      (dir / "o").string() + " --seed 3")
                  .exit_code,
              0);
    const json doc = tokcorr::io::read_json_file(dir / "o" / "results.json");
    EXPECT_EQ(doc["config"]["density"]["limit_k"], 5);
    EXPECT_EQ(doc["config"]["density"]["alpha"], 0.7);
    EXPECT_EQ(doc["config"]["selection"]["seed"], 3);
    EXPECT_EQ(doc["config"]["aggregation"]["knn_k"], 3);
    EXPECT_EQ(doc["run"]["method"], "adaptive");
    EXPECT_EQ(doc["export"]["softmax_stage"], "post");
    const json meta = tokcorr::io::read_json_file(dir / "o" / "sub0.meta.json");
    EXPECT_EQ(meta["config"], doc["config"]);
    EXPECT_TRUE(meta.contains("branch_counts"));
    EXPECT_TRUE(meta.contains("density"));
}

TEST_F(Cli, DensityDefaults) {
    const std::string m = manifest();
    const auto r = run_cli("density --manifest " + m);
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.out.rfind("# alpha=0.7 limit_k=50 count_self=false\n", 0), 0u) << r.out;
    const auto explicit_flags = run_cli("density --manifest " + m + " --alpha 0.7 --limit-k 50");
    EXPECT_EQ(explicit_flags.out, r.out);
    EXPECT_NE(r.out.find("sub2\t64\t"), std::string::npos) << r.out;
}

TEST_F(Cli, DensityHonoursFlags) {
    const std::string m = manifest("--hand-trace");
    const auto r = run_cli("density --manifest " + m + " --limit-k 3");
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("hand_trace\t16\t12\t0.75\t0.25\n"), std::string::npos) << r.out;
}

TEST_F(Cli, FixedBaselineHitsTheRequestedRatio) {
    const std::string m = manifest("--count 5 --n 49 --dim 60 --rho 0.3");
    ASSERT_EQ(run_cli("baseline --manifest " + m + " --method fixed --ratio 0.5 --seed 1 --out " +
                      (dir / "o").string())
                  .exit_code,
              0);
    const auto records = tokcorr::io::load_results(dir / "o");
    ASSERT_EQ(records.size(), 5u);
    for (const auto& rec : records) {
        EXPECT_LE(std::abs(static_cast<double>(rec.retained_indices.size()) - 0.5 * rec.n_tokens), 1.0);
    }
    const json doc = tokcorr::io::read_json_file(dir / "o" / "results.json");
    EXPECT_EQ(doc["run"]["method"], "baseline-fixed");
}

TEST_F(Cli, RandomAndUniformBaselinesRun) {
    const std::string m = manifest();
    EXPECT_EQ(run_cli("baseline --manifest " + m + " --method random --out " + (dir / "r").string()).exit_code, 0);
    EXPECT_EQ(run_cli("baseline --manifest " + m + " --method uniform --out " + (dir / "u").string()).exit_code, 0);
    EXPECT_TRUE(fs::exists(dir / "r" / "results.json"));
    EXPECT_TRUE(fs::exists(dir / "u" / "sub1.tokens.tkzt"));
}

TEST_F(Cli, StatsAndMasks) {
    const std::string m = manifest("--count 4 --rho 0.5");
    ASSERT_EQ(run_cli("compress --manifest " + m + " --out " + (dir / "o").string()).exit_code, 0);
    ASSERT_EQ(run_cli("stats --results " + (dir / "o").string() + " --labels docs --out " + (dir / "s").string())
                  .exit_code,
              0);
    const json stats = tokcorr::io::read_json_file(dir / "s" / "stats.json");
    EXPECT_EQ(stats["datasets"]["docs"]["count"], 4);
    EXPECT_TRUE(fs::exists(dir / "s" / "histogram.csv"));
    EXPECT_TRUE(fs::exists(dir / "s" / "boxplot.csv"));

    ASSERT_EQ(run_cli("masks --manifest " + m + " --results " + (dir / "o").string() + " --out " +
                      (dir / "k").string() + " --scale 2")
                  .exit_code,
              0);
    std::ifstream pgm(dir / "k" / "sub0.selection.pgm");
    std::string magic, width, height;
    pgm >> magic >> width >> height;
    EXPECT_EQ(magic, "P2");
    EXPECT_EQ(width, "16");
    EXPECT_EQ(height, "16");
}

TEST_F(Cli, ErrorsAreOneLineAndNonzero) {
    const std::string m = manifest("--hand-trace");
    tokcorr::io::write_tensor_file(dir / "in" / "hand_trace.attn_low.tkzt",
                                   tokcorr::io::Tensor{{5}, {0.2f, 0.2f, 0.2f, 0.2f, 0.2f}});
    const auto r = run_cli("compress --manifest " + m + " --out " + (dir / "o").string(), true);
    EXPECT_NE(r.exit_code, 0);
    EXPECT_EQ(r.out.rfind("error: DimensionMismatch: ", 0), 0u) << r.out;
    EXPECT_EQ(r.out.find('\n'), r.out.size() - 1) << r.out;
}

TEST_F(Cli, UsageErrorsPrintHelp) {
    const auto r = run_cli("compress", true);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.out.rfind("error: Usage: ", 0), 0u) << r.out;
    EXPECT_NE(r.out.find("--manifest"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("--seed"), std::string::npos) << r.out;
    EXPECT_EQ(run_cli("--help").exit_code, 0);
}

TEST_F(Cli, SelftestPasses) {
    const auto r = run_cli("selftest");
    EXPECT_EQ(r.exit_code, 0) << r.out;
    EXPECT_NE(r.out.find("all oracles passed"), std::string::npos);
}

}  // namespace
