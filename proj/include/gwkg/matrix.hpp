#pragma once
// Row-major dense matrix of doubles plus the handful of products the GCN and
// PCA need. Inner loops go through the kernels layer.

#include <cassert>
#include <cstddef>
#include <cstring>
#include <span>
#include <vector>

#include "gwkg/kernels.hpp"
#include "gwkg/parallel.hpp"

namespace gwkg {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }
    std::span<const double> row_span(std::size_t r) const { return {row(r), cols_}; }
    std::span<double> row_span(std::size_t r) { return {row(r), cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    assert(a.cols() == b.rows());
    Matrix c(a.rows(), b.cols());
    parallel_for(a.rows(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* ci = c.row(i);
            for (std::size_t k = 0; k < a.cols(); ++k) {
                kernels::axpy(a(i, k), b.row(k), ci, b.cols());
            }
        }
    }, 64);
    return c;
}

// C = A^T * B  (A is n x m, B is n x p, C is m x p)
inline Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    assert(a.rows() == b.rows());
    Matrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* bi = b.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            kernels::axpy(a(i, k), bi, c.row(k), b.cols());
        }
    }
    return c;
}

// C = A * B^T  (A is n x m, B is p x m, C is n x p)
inline Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    assert(a.cols() == b.cols());
    Matrix c(a.rows(), b.rows());
    parallel_for(a.rows(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t j = 0; j < b.rows(); ++j) {
                c(i, j) = kernels::dot(a.row(i), b.row(j), a.cols());
            }
        }
    }, 64);
    return c;
}

} // namespace gwkg
