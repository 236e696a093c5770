#ifndef COGDIAG_COMMON_HPP
#define COGDIAG_COMMON_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cogdiag {

enum class ErrorCode {
    MissingHeader,
    BadHeader,
    BadColumnCount,
    EmptyField,
    NoData,
    BadCorrectValue,
    DuplicateResponse,
    NonBinaryEntry,
    EmptyRow,
    DuplicateItem,
    UnknownItem,
    UnknownKC,
    UnknownStudent,
    ExcelNotSupported,
    IndexOutOfRange,
    MasteryOutOfRange,
    EmptyBatch,
    OverrideOutOfRange,
    FlipTargetNotInBase,
    InfeasibleConfig,
    ShapeMismatch,
    InvalidConfig,
    BadModelFile,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingHeader: return "MissingHeader";
        case ErrorCode::BadHeader: return "BadHeader";
        case ErrorCode::BadColumnCount: return "BadColumnCount";
        case ErrorCode::EmptyField: return "EmptyField";
        case ErrorCode::NoData: return "NoData";
        case ErrorCode::BadCorrectValue: return "BadCorrectValue";
        case ErrorCode::DuplicateResponse: return "DuplicateResponse";
        case ErrorCode::NonBinaryEntry: return "NonBinaryEntry";
        case ErrorCode::EmptyRow: return "EmptyRow";
        case ErrorCode::DuplicateItem: return "DuplicateItem";
        case ErrorCode::UnknownItem: return "UnknownItem";
        case ErrorCode::UnknownKC: return "UnknownKC";
        case ErrorCode::UnknownStudent: return "UnknownStudent";
        case ErrorCode::ExcelNotSupported: return "ExcelNotSupported";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::MasteryOutOfRange: return "MasteryOutOfRange";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::OverrideOutOfRange: return "OverrideOutOfRange";
        case ErrorCode::FlipTargetNotInBase: return "FlipTargetNotInBase";
        case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::BadModelFile: return "BadModelFile";
    }
    return "Unknown";
}

/// Library error. `row` is a 1-based line number for file-level errors, 0 otherwise.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::size_t row = 0)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), row_(row), message_(std::move(message)) {}

    ErrorCode code() const noexcept { return code_; }
    std::size_t row() const noexcept { return row_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::size_t row_;
    std::string message_;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Branches on sign so exp never overflows.
inline double sigmoid(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) noexcept {
    if (z > 0.0) {
        return z + std::log1p(std::exp(-z));
    }
    return std::log1p(std::exp(z));
}

/// Cross-entropy of a Bernoulli target given the logit of its probability.
/// Equals -[r log y + (1-r) log(1-y)] with y = sigmoid(z).
inline double bce_from_logit(double z, int r) noexcept { return softplus(z) - r * z; }

/// Seeded generator with platform-independent draws. mt19937_64 output is
/// fixed by the standard but the std distributions are not, so draws are
/// mapped from raw engine output here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() noexcept { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) noexcept { return static_cast<std::size_t>(next() % n); }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) noexcept {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cogdiag

#endif  // COGDIAG_COMMON_HPP
