#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pcomp {

// Dense row-major matrix of doubles. Desk-scale sizes, no blocking or BLAS.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    static Matrix identity(std::size_t n);

    bool operator==(const Matrix&) const = default;
};

Matrix matmul(const Matrix& a, const Matrix& b);

// Row-wise softmax of (scale * m), max-subtracted. Rejects non-finite input.
Matrix softmax_rows(const Matrix& m, double scale);

// v[i] - logsumexp(v); exp(result) sums to 1.
std::vector<double> log_softmax_row(std::span<const double> v);

// Indices of the k largest (resp. smallest) values, ties broken by lower
// index, result sorted ascending by index.
std::vector<std::size_t> top_k_indices(std::span<const double> v, std::size_t k);
std::vector<std::size_t> bottom_k_indices(std::span<const double> v, std::size_t k);

} // namespace pcomp
