// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokcorr/aggregation.hpp"
#include "tokcorr/core.hpp"
#include "tokcorr/density.hpp"
#include "tokcorr/harness/baselines.hpp"
#include "tokcorr/harness/oracles.hpp"
#include "tokcorr/random.hpp"
#include "tokcorr/selection.hpp"

namespace tokcorr::harness {

struct OracleOutcome {
    std::string name;
    bool passed = true;
    std::size_t instances = 0;
    std::string detail;
    double seconds = 0.0;
};

struct SuiteReport {
    std::vector<OracleOutcome> outcomes;

    bool all_passed() const {
        return std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.passed; });
    }

    std::string to_text() const {
        std::ostringstream out;
        for (const auto& o : outcomes) {
            out << (o.passed ? "PASS" : "FAIL") << "  " << o.name << "  (" << o.instances << " instances) "
                << o.detail << '\n';
        }
        out << (all_passed() ? "all oracles passed" : "ORACLE FAILURES") << '\n';
        return out.str();
    }

    nlohmann::json to_json() const {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& o : outcomes) {
            list.push_back({{"name", o.name}, {"passed", o.passed}, {"instances", o.instances}, {"detail", o.detail}});
        }
        return {{"all_passed", all_passed()}, {"oracles", list}};
    }
};

namespace detail {

inline std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(uniform_below(rng, hi - lo + 1));
}

inline double draw_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Random rows, optionally pulled towards a few shared directions so that
/// similarity counts are not all zero. Rows are never zero.
inline oracle::Rows random_rows(Rng& rng, std::size_t n, std::size_t d, bool clustered) {
    oracle::Rows centers(std::max<std::size_t>(1, n / 8 + 1), std::vector<double>(d));
    for (auto& c : centers) {
        for (double& x : c) {
            x = draw_real(rng, -1.0, 1.0);
        }
    }
    oracle::Rows rows(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[uniform_below(rng, centers.size())];
        double ss = 0.0;
        do {
            ss = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double noise = draw_real(rng, -1.0, 1.0);
                rows[i][k] = clustered ? c[k] + 0.3 * noise : noise;
                ss += rows[i][k] * rows[i][k];
            }
        } while (ss < 1e-6);
        // Duplicate an earlier row now and then to create exact ties.
        if (i > 0 && uniform_below(rng, 8) == 0) {
            rows[i] = rows[uniform_below(rng, i)];
        }
    }
    return rows;
}

template <typename Tag>
Matrix<Tag> to_matrix(const oracle::Rows& rows) {
    return Matrix<Tag>::from_rows(rows);
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

}  // namespace detail

inline OracleOutcome check_density_oracle(std::uint64_t seed, std::size_t instances, bool count_self) {
    OracleOutcome o;
    o.name = count_self ? "density oracle (count_self)" : "density oracle";
    detail::Timer timer;
    Rng rng(seed);
    std::size_t redundant_seen = 0;
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t n = detail::draw_between(rng, 1, 64);
        const std::size_t d = detail::draw_between(rng, 1, 32);
        const auto rows = detail::random_rows(rng, n, d, t % 2 == 0);
        DensityConfig cfg;
        cfg.alpha = detail::draw_real(rng, -0.5, 0.95);
        cfg.limit_k = detail::draw_between(rng, 0, n);
        cfg.count_self = count_self;
        const DensityReport got = compute_density(detail::to_matrix<KeyTag>(rows), cfg);
        const auto want = oracle::density(rows, cfg.alpha, cfg.limit_k, cfg.count_self);
        ++o.instances;
        redundant_seen += want.n_redundant;
        if (got.n_redundant != want.n_redundant || got.redundant_mask != want.mask ||
            got.redundancy != want.redundancy || got.density != want.density) {
            o.passed = false;
            o.detail = "mismatch at instance " + std::to_string(t) + " (N=" + std::to_string(n) + ")";
            break;
        }
    }
    if (o.passed) {
        o.detail = "exact match; " + std::to_string(redundant_seen) + " redundant tokens total";
    }
    o.seconds = timer.seconds();
    return o;
}

inline OracleOutcome check_iqr_oracle(std::uint64_t seed, std::size_t instances) {
    OracleOutcome o;
    o.name = "IQR fence oracle";
    detail::Timer timer;
    Rng rng(seed);
    std::vector<std::vector<double>> cases;
    cases.push_back(std::vector<double>(8, 0.125));                       // all equal
    cases.push_back({1, 1, 1, 1, 1, 1, 1, 10});                           // single spike
    cases.push_back({0.0});                                               // singleton
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t n = detail::draw_between(rng, 1, 128);
        std::vector<double> v(n);
        const int shape = static_cast<int>(t % 4);
        for (double& x : v) {
            switch (shape) {
            case 0: x = uniform01(rng); break;
            case 1: x = static_cast<double>(uniform_below(rng, 5)); break;  // heavy ties
            case 2: x = std::exp(4.0 * uniform01(rng)); break;              // skewed
            default: x = uniform01(rng) < 0.05 ? 50.0 * uniform01(rng) : 0.01 * uniform01(rng); break;
            }
        }
        cases.push_back(std::move(v));
    }
    SelectionConfig cfg;
    std::size_t outliers_seen = 0;
    for (std::size_t t = 0; t < cases.size(); ++t) {
        const auto got = global_select(AttentionVector(cases[t]), cfg);
        const auto want = oracle::upper_outliers(cases[t], cfg.iqr_factor);
        ++o.instances;
        outliers_seen += want.size();
        bool edge_ok = true;
        if (t == 0) {
            edge_ok = got.empty();
        } else if (t == 1) {
            edge_ok = got == IndexSet{7};
        }
        if (got != want || !edge_ok) {
            o.passed = false;
            o.detail = "mismatch at case " + std::to_string(t);
            break;
        }
    }
    if (o.passed) {
        o.detail = "exact match incl. all-equal and single-spike cases; " + std::to_string(outliers_seen) +
                   " outliers total";
    }
    o.seconds = timer.seconds();
    return o;
}

inline OracleOutcome check_aggregation_oracle(std::uint64_t seed, std::size_t instances, bool include_self) {
    OracleOutcome o;
    o.name = include_self ? "aggregation oracle (include_self)" : "aggregation oracle (neighbors only)";
    detail::Timer timer;
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t n = detail::draw_between(rng, 2, 32);
        const std::size_t dk = detail::draw_between(rng, 1, 16);
        const std::size_t dy = detail::draw_between(rng, 1, 8);
        AggregationConfig cfg;
        cfg.include_self = include_self;
        cfg.knn_k = detail::draw_between(rng, include_self ? 0 : 1, std::min<std::size_t>(4, n - 1));
        cfg.normalize_weights = uniform_below(rng, 4) != 0;
        const auto keys = detail::random_rows(rng, n, dk, t % 2 == 0);
        oracle::Rows tokens(n, std::vector<double>(dy));
        for (auto& r : tokens) {
            for (double& x : r) {
                x = detail::draw_real(rng, -2.0, 2.0);
            }
        }
        std::vector<double> attn(n);
        for (double& a : attn) {
            a = uniform_below(rng, 6) == 0 ? 0.0 : uniform01(rng);
        }
        std::vector<std::size_t> retained;
        for (std::size_t i = 0; i < n; ++i) {
            if (uniform_below(rng, 3) == 0) {
                retained.push_back(i);
            }
        }
        if (retained.empty()) {
            retained.push_back(uniform_below(rng, n));
        }
        const TokenMatrix got = aggregate(detail::to_matrix<TokenTag>(tokens), detail::to_matrix<KeyTag>(keys),
                                          AttentionVector(attn), retained, cfg);
        const auto want = oracle::knn_aggregate(tokens, keys, attn, retained, cfg.knn_k, cfg.include_self,
                                                cfg.normalize_weights);
        ++o.instances;
        for (std::size_t r = 0; r < want.size(); ++r) {
            for (std::size_t c = 0; c < dy; ++c) {
                worst = std::max(worst, std::abs(got(r, c) - want[r][c]));
            }
        }
        if (!(worst <= 1e-6)) {
            o.passed = false;
            o.detail = "instance " + std::to_string(t) + " deviates by " + std::to_string(worst);
            break;
        }
    }
    if (o.passed) {
        std::ostringstream s;
        s << "max elementwise deviation " << worst << " (tolerance 1e-6)";
        o.detail = s.str();
    }
    o.seconds = timer.seconds();
    return o;
}

/// First-draw frequency of a skewed distribution and a chi-square test of
/// subset uniformity.
inline OracleOutcome check_sampling_distribution(std::uint64_t seed) {
    OracleOutcome o;
    o.name = "local sampling distribution";
    detail::Timer timer;
    Rng rng(seed);

    constexpr std::size_t kSkewTrials = 100000;
    const AttentionVector skewed({0.7, 0.2, 0.1});
    std::size_t first = 0;
    for (std::size_t t = 0; t < kSkewTrials; ++t) {
        first += local_select(skewed, 1, rng).front() == 0 ? 1 : 0;
    }
    const double freq = static_cast<double>(first) / kSkewTrials;

    constexpr std::size_t kSubsetTrials = 50000;
    const AttentionVector flat(std::vector<double>(5, 0.2));
    std::vector<double> counts(10, 0.0);
    const auto subset_index = [](std::size_t a, std::size_t b) {
        // Lexicographic rank of {a < b} among the 2-subsets of {0..4}.
        std::size_t rank = 0;
        for (std::size_t i = 0; i < a; ++i) {
            rank += 4 - i;
        }
        return rank + (b - a - 1);
    };
    for (std::size_t t = 0; t < kSubsetTrials; ++t) {
        const auto pick = local_select(flat, 2, rng);
        counts[subset_index(pick[0], pick[1])] += 1.0;
    }
    const double stat = oracle::chi_square(counts, std::vector<double>(10, kSubsetTrials / 10.0));

    o.instances = kSkewTrials + kSubsetTrials;
    o.passed = freq >= 0.69 && freq <= 0.71 && stat < oracle::kChiSquare9Df001;
    std::ostringstream s;
    s << "P(first=0)=" << freq << " (want 0.7 +/- 0.01); chi2=" << stat << " (< " << oracle::kChiSquare9Df001
      << ")";
    o.detail = s.str();
    o.seconds = timer.seconds();
    return o;
}

/// Marginal inclusion frequency of the random baseline (hypergeometric 1/3).
inline OracleOutcome check_random_baseline(std::uint64_t seed) {
    OracleOutcome o;
    o.name = "random baseline marginals";
    detail::Timer timer;
    // Four clones and two orthogonal keys: density 1/3, so m = 2 of N = 6.
    SubImageBundle b;
    b.grid = {2, 3};
    b.keys_low = KeyMatrix::from_rows({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 0, 0}, {0, 0, 1}, {1, 0, 0}});
    b.keys_deep = b.keys_low;
    b.y_last = TokenMatrix(6, 2);
    b.attn_low = AttentionVector(std::vector<double>(6, 1.0 / 6.0));
    b.attn_deep = b.attn_low;
    DensityConfig dcfg;
    dcfg.limit_k = 2;
    const DensityReport density = compute_density(b.keys_low, dcfg);

    constexpr std::size_t kTrials = 30000;
    std::vector<std::size_t> hits(6, 0);
    bool sizes_ok = true;
    for (std::size_t t = 0; t < kTrials; ++t) {
        SelectionConfig cfg;
        cfg.seed = derive_stream_seed(seed, t);
        const auto sel = baseline_select(Baseline{BaselineMethod::Random}, b, density, cfg);
        sizes_ok = sizes_ok && sel.local_indices.size() == 2;
        for (std::size_t i : sel.local_indices) {
            ++hits[i];
        }
    }
    double worst = 0.0;
    for (std::size_t h : hits) {
        worst = std::max(worst, std::abs(static_cast<double>(h) / kTrials - 1.0 / 3.0));
    }
    o.instances = kTrials;
    o.passed = sizes_ok && worst <= 0.01;
    std::ostringstream s;
    s << "max |freq - 1/3| = " << worst << " (tolerance 0.01)";
    o.detail = s.str();
    o.seconds = timer.seconds();
    return o;
}

inline constexpr std::uint64_t kDefaultSuiteSeed = 20240601;

/// Every oracle-equivalence and distribution check on randomized instances.
/// Failures are reported in the outcome list, never thrown.
inline SuiteReport oracle_suite(std::uint64_t seed = kDefaultSuiteSeed, std::size_t instances = 200) {
    SuiteReport report;
    const auto run = [&](auto&& check) {
        try {
            report.outcomes.push_back(check());
        } catch (const std::exception& e) {
            report.outcomes.push_back({"oracle raised", false, 0, e.what(), 0.0});
        }
    };
    run([&] { return check_density_oracle(splitmix64(seed + 1), instances, false); });
    run([&] { return check_density_oracle(splitmix64(seed + 2), instances, true); });
    run([&] { return check_iqr_oracle(splitmix64(seed + 3), instances); });
    run([&] { return check_aggregation_oracle(splitmix64(seed + 4), instances, true); });
    run([&] { return check_aggregation_oracle(splitmix64(seed + 5), instances, false); });
    run([&] { return check_sampling_distribution(splitmix64(seed + 6)); });
    run([&] { return check_random_baseline(splitmix64(seed + 7)); });
    return report;
}

}  // namespace tokcorr::harness
