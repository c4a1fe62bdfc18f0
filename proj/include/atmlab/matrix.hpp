// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace atmlab {

/// Dense row-major matrix of 64-bit floats, the value type of the whole
/// library. Nonempty by construction; every producing operation checks that
/// the result is finite.
class Matrix {
  public:
    Matrix(std::size_t rows, std::size_t cols);  // zero-filled
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_str() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

/// Throws NumericError if any entry is NaN or infinite.
void ensure_finite(const Matrix& m, const char* where);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& x);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& x, double s);
Matrix relu(const Matrix& x);
/// x + row broadcast to every row of x; row must be 1 x x.cols().
Matrix add_rowvec(const Matrix& x, const Matrix& row);
/// Arithmetic mean of the rows, shape 1 x cols.
Matrix mean_pool_rows(const Matrix& x);
/// Row-wise softmax with per-row max subtraction; rows sum to 1.
Matrix softmax_rows(const Matrix& x);
/// Stack matrices top to bottom; all must share the column count.
Matrix concat_rows(std::span<const Matrix> parts);
/// Sum of the columns, shape 1 x cols.
Matrix colsum(const Matrix& x);

double sum_all(const Matrix& x);
/// Mean squared error over all entries; shapes must match.
double mse(const Matrix& pred, const Matrix& target);
double max_abs(const Matrix& x);

/// Lowest index of the maximum in a 1 x n matrix (ties break low).
std::size_t argmax_row(const Matrix& x);

}  // namespace atmlab
