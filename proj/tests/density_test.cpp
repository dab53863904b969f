// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include <numeric>
#include <vector>

#include "gtest/gtest.h"
#include "tokcorr/density.hpp"
#include "tokcorr/harness/oracles.hpp"
#include "tokcorr/random.hpp"

namespace tokcorr {
namespace {

oracle::Rows random_rows(Rng& rng, std::size_t n, std::size_t d) {
    oracle::Rows rows(n, std::vector<double>(d));
    const std::vector<double> pull = [&] {
        std::vector<double> c(d);
        for (double& x : c) {
            x = 2.0 * uniform01(rng) - 1.0;
        }
        return c;
    }();
    for (auto& r : rows) {
        for (std::size_t k = 0; k < d; ++k) {
            r[k] = pull[k] + 0.8 * (2.0 * uniform01(rng) - 1.0);
        }
    }
    return rows;
}

TEST(Density, DefaultsAreThePublishedSetting) {
    const DensityConfig cfg;
    EXPECT_DOUBLE_EQ(cfg.alpha, 0.7);
    EXPECT_EQ(cfg.limit_k, 50u);
    EXPECT_FALSE(cfg.count_self);
}

TEST(Density, ThreeClonesOneOrthogonal) {
    DensityConfig cfg;
    cfg.limit_k = 1;
    const auto r = compute_density(KeyMatrix::from_rows({{1, 0}, {1, 0}, {1, 0}, {0, 1}}), cfg);
    EXPECT_EQ(r.n_redundant, 3u);
    EXPECT_DOUBLE_EQ(r.redundancy, 0.75);
    EXPECT_DOUBLE_EQ(r.density, 0.25);
    EXPECT_EQ(r.redundant_mask, (std::vector<bool>{true, true, true, false}));
}

TEST(Density, OrthogonalRowsAreNeverRedundant) {
    DensityConfig cfg;
    cfg.alpha = 0.1;
    cfg.limit_k = 0;
    const auto r = compute_density(KeyMatrix::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}), cfg);
    EXPECT_EQ(r.n_redundant, 0u);
    EXPECT_DOUBLE_EQ(r.density, 1.0);
}

TEST(Density, CountSelfFollowsTheLiteralLoop) {
    // With self counted every token has one similar peer already, so
    // limit_k = 0 makes even orthogonal tokens redundant.
    DensityConfig cfg;
    cfg.limit_k = 0;
    cfg.count_self = true;
    const auto r = compute_density(KeyMatrix::from_rows({{1, 0}, {0, 1}}), cfg);
    EXPECT_EQ(r.n_redundant, 2u);
    EXPECT_DOUBLE_EQ(r.density, 0.0);
}

TEST(Density, ComparisonsAreStrict) {
    // cos = 0.6 exactly for (1,0) vs (0.6,0.8); alpha = 0.6 must not count it.
    DensityConfig cfg;
    cfg.alpha = 0.6;
    cfg.limit_k = 0;
    const auto r = compute_density(KeyMatrix::from_rows({{1, 0}, {0.6, 0.8}}), cfg);
    EXPECT_EQ(r.n_redundant, 0u);
    // Exactly limit_k peers is not "more than" limit_k.
    DensityConfig at_limit;
    at_limit.limit_k = 2;
    EXPECT_EQ(compute_density(KeyMatrix::from_rows({{1, 0}, {1, 0}, {1, 0}}), at_limit).n_redundant, 0u);
}

TEST(Density, ZeroRowPropagates) {
    try {
        compute_density(KeyMatrix::from_rows({{1, 0}, {0, 0}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroRow);
    }
}

TEST(Density, InvalidAlphaRejected) {
    DensityConfig cfg;
    cfg.alpha = 1.0;
    EXPECT_THROW(compute_density(KeyMatrix::from_rows({{1.0}}), cfg), Error);
}

TEST(Density, MatchesDoubleLoopOracleOnRandomKeys) {
    Rng rng(32);
    for (int t = 0; t < 50; ++t) {
        const auto rows = random_rows(rng, 32, 6);
        for (bool self : {false, true}) {
            DensityConfig cfg;
            cfg.limit_k = 3;
            cfg.count_self = self;
            const auto got = compute_density(KeyMatrix::from_rows(rows), cfg);
            const auto want = oracle::density(rows, 0.7, 3, self);
            ASSERT_EQ(got.n_redundant, want.n_redundant);
            ASSERT_EQ(got.redundant_mask, want.mask);
            ASSERT_EQ(got.density, want.density);
        }
    }
}

TEST(Density, ReportInvariants) {
    Rng rng(8);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 1 + uniform_below(rng, 40);
        DensityConfig cfg;
        cfg.limit_k = uniform_below(rng, 6);
        const auto r = compute_density(KeyMatrix::from_rows(random_rows(rng, n, 4)), cfg);
        const auto pop = static_cast<std::size_t>(std::count(r.redundant_mask.begin(), r.redundant_mask.end(), true));
        EXPECT_EQ(pop, r.n_redundant);
        EXPECT_EQ(r.redundancy, static_cast<double>(r.n_redundant) / static_cast<double>(n));
        EXPECT_EQ(r.density, 1.0 - r.redundancy);
        EXPECT_GE(r.density, 0.0);
        EXPECT_LE(r.density, 1.0);
    }
}

TEST(Density, MonotoneInAlphaAndLimit) {
    Rng rng(44);
    for (int t = 0; t < 20; ++t) {
        const KeyMatrix keys = KeyMatrix::from_rows(random_rows(rng, 24, 5));
        std::size_t prev = SIZE_MAX;
        for (double alpha = -0.9; alpha < 0.99; alpha += 0.1) {
            DensityConfig cfg;
            cfg.alpha = alpha;
            cfg.limit_k = 4;
            const std::size_t nr = compute_density(keys, cfg).n_redundant;
            EXPECT_LE(nr, prev);
            prev = nr;
        }
        prev = SIZE_MAX;
        for (std::size_t k = 0; k < 24; ++k) {
            DensityConfig cfg;
            cfg.limit_k = k;
            const std::size_t nr = compute_density(keys, cfg).n_redundant;
            EXPECT_LE(nr, prev);
            prev = nr;
        }
    }
}

TEST(Density, PermutationEquivariant) {
    Rng rng(91);
    for (int t = 0; t < 20; ++t) {
        const auto rows = random_rows(rng, 20, 5);
        std::vector<std::size_t> perm(rows.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = perm.size(); i > 1; --i) {
            std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
        }
        oracle::Rows permuted(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            permuted[i] = rows[perm[i]];
        }
        DensityConfig cfg;
        cfg.limit_k = 3;
        const auto a = compute_density(KeyMatrix::from_rows(rows), cfg);
        const auto b = compute_density(KeyMatrix::from_rows(permuted), cfg);
        EXPECT_EQ(a.density, b.density);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            EXPECT_EQ(b.redundant_mask[i], a.redundant_mask[perm[i]]);
        }
    }
}

TEST(Density, ClonesPlusOrthogonalGiveExactDensity) {
    // c clones of e0 plus (n - c) distinct axes: only clones have c - 1 > limit_k peers.
    for (std::size_t c = 3; c <= 12; ++c) {
        const std::size_t n = 2 * c;
        KeyMatrix keys(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            keys(i, i < c ? 0 : i) = 1.0;
        }
        DensityConfig cfg;
        cfg.alpha = 0.5;
        cfg.limit_k = c - 2;
        const auto r = compute_density(keys, cfg);
        EXPECT_EQ(r.density, 1.0 - static_cast<double>(c) / static_cast<double>(n));
    }
}

}  // namespace
}  // namespace tokcorr
