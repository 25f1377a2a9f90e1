#include "wmm/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace wmm {

WeightMatrix::WeightMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("WeightMatrix: dimensions must be positive");
    }
    values_.assign(rows * cols, fill);
}

WeightMatrix::WeightMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("WeightMatrix: dimensions must be positive");
    }
    if (values_.size() != rows * cols) {
        throw std::invalid_argument("WeightMatrix: expected " + std::to_string(rows * cols) +
                                    " values, got " + std::to_string(values_.size()));
    }
}

MatrixRef WeightMatrix::row_block(std::size_t first, std::size_t count) {
    if (count == 0 || first + count > rows_) {
        throw std::out_of_range("WeightMatrix::row_block: rows out of range");
    }
    return {std::span<double>(values_).subspan(first * cols_, count * cols_), count, cols_};
}

ConstMatrixRef WeightMatrix::row_block(std::size_t first, std::size_t count) const {
    if (count == 0 || first + count > rows_) {
        throw std::out_of_range("WeightMatrix::row_block: rows out of range");
    }
    return {std::span<const double>(values_).subspan(first * cols_, count * cols_), count, cols_};
}

bool WeightMatrix::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<MatrixRef> split_filters(std::span<double> bank, std::size_t filters,
                                     std::size_t kernel_rows, std::size_t kernel_cols) {
    const std::size_t per_filter = kernel_rows * kernel_cols;
    if (filters == 0 || per_filter == 0 || bank.size() != filters * per_filter) {
        throw std::invalid_argument("split_filters: bank size does not match filter shape");
    }
    std::vector<MatrixRef> out;
    out.reserve(filters);
    for (std::size_t f = 0; f < filters; ++f) {
        out.push_back({bank.subspan(f * per_filter, per_filter), kernel_rows, kernel_cols});
    }
    return out;
}

} // namespace wmm
