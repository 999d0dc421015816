#include "tensor.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pcomp {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m.at(i, i) = 1.0;
    }
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        fail_validation("matmul: shape mismatch " + std::to_string(a.rows) + "x" +
                        std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                        std::to_string(b.cols));
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            double* orow = out.data.data() + i * out.cols;
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix softmax_rows(const Matrix& m, double scale) {
    if (!(scale > 0.0)) {
        fail_validation("softmax_rows: scale must be > 0");
    }
    for (double x : m.data) {
        if (!std::isfinite(x)) {
            fail_validation("softmax_rows: non-finite input");
        }
    }
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        auto in = m.row(i);
        auto o = out.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (double x : in) mx = std::max(mx, x * scale);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            o[j] = std::exp(in[j] * scale - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) o[j] /= sum;
    }
    return out;
}

std::vector<double> log_softmax_row(std::span<const double> v) {
    if (v.empty()) {
        fail_validation("log_softmax_row: empty vector");
    }
    for (double x : v) {
        if (!std::isfinite(x)) {
            fail_validation("log_softmax_row: non-finite input");
        }
    }
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
    return out;
}

namespace {

std::vector<std::size_t> k_extreme_indices(std::span<const double> v, std::size_t k, bool largest) {
    if (k > v.size()) {
        fail_validation("top/bottom_k: k=" + std::to_string(k) + " exceeds length " +
                        std::to_string(v.size()));
    }
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return largest ? v[a] > v[b] : v[a] < v[b];
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

std::vector<std::size_t> top_k_indices(std::span<const double> v, std::size_t k) {
    return k_extreme_indices(v, k, true);
}

std::vector<std::size_t> bottom_k_indices(std::span<const double> v, std::size_t k) {
    return k_extreme_indices(v, k, false);
}

} // namespace pcomp
