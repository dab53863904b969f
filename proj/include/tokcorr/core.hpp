// Copyright (C) 2026 The tokcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tokcorr {

enum class ErrorCode {
    ZeroRow,
    DimensionMismatch,
    EmptyInput,
    InsufficientSupport,
    EmptyRetention,
    NeighborCountExceedsTokens,
    GlobalImageRejected,
    MultipleGlobalImages,
    EmptyCorpus,
    ParseError,
    BadMagic,
    UnsupportedVersion,
    UnsupportedDtype,
    TruncatedFile,
    NonFiniteValue,
    ZeroKeyRow,
    InvalidAttention,
    GridMismatch,
    InfeasibleSpec,
    InvalidConfig,
    IoError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InsufficientSupport: return "InsufficientSupport";
    case ErrorCode::EmptyRetention: return "EmptyRetention";
    case ErrorCode::NeighborCountExceedsTokens: return "NeighborCountExceedsTokens";
    case ErrorCode::GlobalImageRejected: return "GlobalImageRejected";
    case ErrorCode::MultipleGlobalImages: return "MultipleGlobalImages";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ZeroKeyRow: return "ZeroKeyRow";
    case ErrorCode::InvalidAttention: return "InvalidAttention";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a code so callers (and the
/// CLI's one-line error output) can dispatch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          m_code(code) {}

    ErrorCode code() const noexcept {
        return m_code;
    }

private:
    ErrorCode m_code;
};

/// Sorted, duplicate-free token indices.
using IndexSet = std::vector<std::size_t>;

/// Row-major dense matrix of doubles. The tag parameter keeps token
/// embeddings, attention keys and similarity matrices from being mixed up.
template <typename Tag>
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols) : m_rows(rows), m_cols(cols), m_data(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : m_rows(rows), m_cols(cols), m_data(std::move(data)) {
        if (m_data.size() != rows * cols) {
            throw Error(ErrorCode::DimensionMismatch,
                        "matrix data length " + std::to_string(m_data.size()) + " != " + std::to_string(rows) +
                            "x" + std::to_string(cols));
        }
    }

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) {
            return Matrix();
        }
        const std::size_t cols = rows.front().size();
        std::vector<double> data;
        data.reserve(rows.size() * cols);
        for (const auto& row : rows) {
            if (row.size() != cols) {
                throw Error(ErrorCode::DimensionMismatch, "ragged rows in matrix literal");
            }
            data.insert(data.end(), row.begin(), row.end());
        }
        return Matrix(rows.size(), cols, std::move(data));
    }

    std::size_t rows() const noexcept {
        return m_rows;
    }
    std::size_t cols() const noexcept {
        return m_cols;
    }
    bool empty() const noexcept {
        return m_data.empty();
    }

    std::span<const double> row(std::size_t i) const {
        return {m_data.data() + i * m_cols, m_cols};
    }
    std::span<double> row(std::size_t i) {
        return {m_data.data() + i * m_cols, m_cols};
    }

    double operator()(std::size_t i, std::size_t j) const {
        return m_data[i * m_cols + j];
    }
    double& operator()(std::size_t i, std::size_t j) {
        return m_data[i * m_cols + j];
    }

    const std::vector<double>& data() const noexcept {
        return m_data;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<double> m_data;
};

struct TokenTag {};
struct KeyTag {};
struct SimilarityTag {};

using TokenMatrix = Matrix<TokenTag>;
using KeyMatrix = Matrix<KeyTag>;
using SimilarityMatrix = Matrix<SimilarityTag>;

/// CLS-to-patch attention scores of one layer, already reduced over heads.
class AttentionVector {
public:
    AttentionVector() = default;
    explicit AttentionVector(std::vector<double> scores) : m_scores(std::move(scores)) {}

    std::size_t size() const noexcept {
        return m_scores.size();
    }
    bool empty() const noexcept {
        return m_scores.empty();
    }
    double operator[](std::size_t i) const {
        return m_scores[i];
    }
    std::span<const double> scores() const noexcept {
        return m_scores;
    }

    double sum() const {
        double total = 0.0;
        for (double s : m_scores) {
            total += s;
        }
        return total;
    }

    bool operator==(const AttentionVector&) const = default;

private:
    std::vector<double> m_scores;
};

inline constexpr double kZeroNormThreshold = 1e-12;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline double l2_norm(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

/// Scales every key row to unit Euclidean norm.
inline KeyMatrix normalize_rows(const KeyMatrix& keys) {
    KeyMatrix out = keys;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        const double norm = l2_norm(row);
        if (!(norm >= kZeroNormThreshold)) {
            throw Error(ErrorCode::ZeroRow, "key row " + std::to_string(i) + " has zero norm");
        }
        for (double& x : row) {
            x /= norm;
        }
    }
    return out;
}

/// Gram matrix of unit-normalized key rows, i.e. pairwise cosine similarity.
inline SimilarityMatrix similarity_matrix(const KeyMatrix& keys_normalized) {
    if (keys_normalized.rows() == 0 || keys_normalized.cols() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "similarity of an empty key matrix");
    }
    const std::size_t n = keys_normalized.rows();
    SimilarityMatrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ri = keys_normalized.row(i);
        for (std::size_t j = i; j < n; ++j) {
            const double s = dot(ri, keys_normalized.row(j));
            sim(i, j) = s;
            sim(j, i) = s;
        }
    }
    return sim;
}

/// Quantile with linear interpolation between order statistics (the
/// "type 7" rule): position q*(n-1) in the sorted values.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        throw Error(ErrorCode::EmptyInput, "quantile of an empty list");
    }
    q = std::clamp(q, 0.0, 1.0);
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> values, double q) {
    if (values.empty()) {
        throw Error(ErrorCode::EmptyInput, "quantile of an empty list");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, q);
}

namespace detail {

inline void require_finite(std::span<const double> values, const std::string& what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorCode::NonFiniteValue, what + " has a non-finite value at index " + std::to_string(i));
        }
    }
}

}  // namespace detail

}  // namespace tokcorr
