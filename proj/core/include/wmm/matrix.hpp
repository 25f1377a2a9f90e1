#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmm {

/// Mutable row-major view over a contiguous block of parameters.
///
/// LSTM gate slices and 2D convolution filters are contiguous row blocks of a
/// larger buffer, so every WMM target can be expressed as one of these.
struct MatrixRef {
    std::span<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;

    double& operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::size_t size() const noexcept { return rows * cols; }
};

struct ConstMatrixRef {
    std::span<const double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;

    ConstMatrixRef() = default;
    ConstMatrixRef(std::span<const double> v, std::size_t r, std::size_t c)
        : values(v), rows(r), cols(c) {}
    ConstMatrixRef(MatrixRef m) : values(m.values), rows(m.rows), cols(m.cols) {}

    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::size_t size() const noexcept { return rows * cols; }
};

/// Owning weight matrix, row-major.
class WeightMatrix {
public:
    WeightMatrix() = default;
    WeightMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    WeightMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    MatrixRef ref() noexcept { return {values_, rows_, cols_}; }
    ConstMatrixRef cref() const noexcept { return {values_, rows_, cols_}; }

    /// Rows [first, first + count) as a view.
    MatrixRef row_block(std::size_t first, std::size_t count);
    ConstMatrixRef row_block(std::size_t first, std::size_t count) const;

    bool all_finite() const noexcept;

    friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Splits a filter bank laid out as [filters][kernel_rows][kernel_cols] into
/// one 2D view per filter.
std::vector<MatrixRef> split_filters(std::span<double> bank, std::size_t filters,
                                     std::size_t kernel_rows, std::size_t kernel_cols);

} // namespace wmm
