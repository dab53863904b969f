// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations written straight from the algorithm
// statements. Nothing here calls into the library so that agreement between
// the two is meaningful.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

namespace tokcorr::oracle {

using Rows = std::vector<std::vector<double>>;

struct DensityOracleResult {
    std::size_t n_redundant = 0;
    std::vector<bool> mask;
    double redundancy = 0.0;
    double density = 1.0;
};

inline Rows unit_rows(const Rows& rows) {
    Rows out = rows;
    for (auto& r : out) {
        double ss = 0.0;
        for (double x : r) {
            ss += x * x;
        }
        const double norm = std::sqrt(ss);
        for (double& x : r) {
            x /= norm;
        }
    }
    return out;
}

inline double inner(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

/// Double loop over all pairs, counting similarities above alpha.
inline DensityOracleResult density(const Rows& keys, double alpha, std::size_t limit_k, bool count_self) {
    const Rows u = unit_rows(keys);
    const std::size_t n = u.size();
    DensityOracleResult res;
    res.mask.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t cnt = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j && !count_self) {
                continue;
            }
            cnt += inner(u[i], u[j]) > alpha ? 1 : 0;
        }
        if (cnt > limit_k) {
            res.mask[i] = true;
            res.n_redundant += 1;
        }
    }
    res.redundancy = static_cast<double>(res.n_redundant) / static_cast<double>(n);
    res.density = 1.0 - res.redundancy;
    return res;
}

/// Sort, read Q1 and Q3 at fractional positions q*(n-1), keep scores
/// strictly above Q3 + factor*(Q3 - Q1).
inline std::vector<std::size_t> upper_outliers(const std::vector<double>& scores, double factor) {
    std::vector<double> v = scores;
    std::sort(v.begin(), v.end());
    const auto at = [&](double q) {
        const double h = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(h);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    const double q1 = at(0.25);
    const double q3 = at(0.75);
    const double fence = q3 + factor * (q3 - q1);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > fence) {
            out.push_back(i);
        }
    }
    return out;
}

/// For each retained index: rank every other token by key cosine similarity
/// (fully sorted, ties to the lower index), take the top k, and form the
/// attention-weighted sum.
inline Rows knn_aggregate(const Rows& tokens,
                          const Rows& keys,
                          const std::vector<double>& attn,
                          const std::vector<std::size_t>& retained,
                          std::size_t k,
                          bool include_self,
                          bool normalize) {
    const Rows u = unit_rows(keys);
    const std::size_t n = tokens.size();
    Rows sim(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            sim[i][j] = inner(u[i], u[j]);
        }
    }
    Rows out;
    for (std::size_t l : retained) {
        std::vector<std::size_t> others;
        for (std::size_t p = 0; p < n; ++p) {
            if (p != l) {
                others.push_back(p);
            }
        }
        std::sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
            if (sim[l][a] != sim[l][b]) {
                return sim[l][a] > sim[l][b];
            }
            return a < b;
        });
        std::vector<std::size_t> group(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
        if (include_self) {
            group.push_back(l);
        }
        double total = 0.0;
        for (std::size_t p : group) {
            total += attn[p];
        }
        std::vector<double> row(tokens[l].size(), 0.0);
        for (std::size_t p : group) {
            double w = attn[p];
            if (normalize) {
                w = total > 0.0 ? w / total : 1.0 / static_cast<double>(group.size());
            }
            for (std::size_t c = 0; c < row.size(); ++c) {
                row[c] += w * tokens[p][c];
            }
        }
        out.push_back(std::move(row));
    }
    return out;
}

/// Pearson chi-square statistic of observed counts against expected counts.
inline double chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double d = observed[i] - expected[i];
        stat += d * d / expected[i];
    }
    return stat;
}

/// Upper 0.001 critical value of the chi-square distribution with 9 degrees
/// of freedom (10 categories).
inline constexpr double kChiSquare9Df001 = 27.877164871256568;

}  // namespace tokcorr::oracle
