// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/matrix.hpp"

#include <cmath>
#include <cstdio>

#include "atmlab/errors.hpp"
#include "atmlab/kernels.hpp"

namespace atmlab {
namespace {

std::string shape_of(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
    throw DimensionError(std::string(op) + ": lhs is " + a.shape_str() +
                         ", rhs is " + b.shape_str());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0)
        throw ContractError("Matrix: dimensions must be positive, got " +
                            shape_of(rows, cols));
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0)
        throw ContractError("Matrix: dimensions must be positive, got " +
                            shape_of(rows, cols));
    if (data_.size() != rows * cols)
        throw ContractError("Matrix: " + shape_of(rows, cols) + " needs " +
                            std::to_string(rows * cols) + " values, got " +
                            std::to_string(data_.size()));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    if (rows_ == 0 || cols_ == 0)
        throw ContractError("Matrix: empty initializer");
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_)
            throw ContractError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

std::string Matrix::shape_str() const { return shape_of(rows_, cols_); }

void ensure_finite(const Matrix& m, const char* where) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!std::isfinite(m.data()[i]))
            throw NumericError(std::string(where) + ": non-finite entry at " +
                               std::to_string(i / m.cols()) + "," +
                               std::to_string(i % m.cols()));
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_fail("matmul", a, b);
    Matrix c(a.rows(), b.cols());
    kernels::active().matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(),
                             b.cols());
    ensure_finite(c, "matmul");
    return c;
}

Matrix transpose(const Matrix& x) {
    Matrix t(x.cols(), x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) t.at(j, i) = x.at(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("add", a, b);
    Matrix out(a.rows(), a.cols());
    kernels::active().add(a.data(), b.data(), out.data(), a.size());
    ensure_finite(out, "add");
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("sub", a, b);
    Matrix out(a.rows(), a.cols());
    kernels::active().sub(a.data(), b.data(), out.data(), a.size());
    ensure_finite(out, "sub");
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_fail("hadamard", a, b);
    Matrix out(a.rows(), a.cols());
    kernels::active().mul(a.data(), b.data(), out.data(), a.size());
    ensure_finite(out, "hadamard");
    return out;
}

Matrix scale(const Matrix& x, double s) {
    Matrix out(x.rows(), x.cols());
    kernels::active().scale(x.data(), s, out.data(), x.size());
    ensure_finite(out, "scale");
    return out;
}

Matrix relu(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    kernels::active().relu(x.data(), out.data(), x.size());
    return out;
}

Matrix add_rowvec(const Matrix& x, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != x.cols())
        shape_fail("add_rowvec", x, row);
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        kernels::active().add(x.data() + i * x.cols(), row.data(),
                              out.data() + i * x.cols(), x.cols());
    ensure_finite(out, "add_rowvec");
    return out;
}

Matrix mean_pool_rows(const Matrix& x) {
    Matrix out(1, x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out.at(0, j) += x.at(i, j);
    const double inv = 1.0 / static_cast<double>(x.rows());
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(0, j) *= inv;
    ensure_finite(out, "mean_pool_rows");
    return out;
}

Matrix softmax_rows(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double mx = x.at(i, 0);
        for (std::size_t j = 1; j < x.cols(); ++j)
            if (x.at(i, j) > mx) mx = x.at(i, j);
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) /= sum;
    }
    ensure_finite(out, "softmax_rows");
    return out;
}

Matrix concat_rows(std::span<const Matrix> parts) {
    if (parts.empty()) throw ContractError("concat_rows: empty input");
    const std::size_t cols = parts[0].cols();
    std::size_t rows = 0;
    for (const Matrix& p : parts) {
        if (p.cols() != cols) shape_fail("concat_rows", parts[0], p);
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const Matrix& p : parts) {
        for (std::size_t i = 0; i < p.size(); ++i)
            out.data()[at + i] = p.data()[i];
        at += p.size();
    }
    return out;
}

Matrix colsum(const Matrix& x) {
    Matrix out(1, x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out.at(0, j) += x.at(i, j);
    ensure_finite(out, "colsum");
    return out;
}

double sum_all(const Matrix& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x.data()[i];
    return s;
}

double mse(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) shape_fail("mse", pred, target);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double max_abs(const Matrix& x) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::fabs(x.data()[i]);
        if (a > m) m = a;
    }
    return m;
}

std::size_t argmax_row(const Matrix& x) {
    if (x.rows() != 1) throw ContractError("argmax_row: need a 1-row matrix");
    std::size_t best = 0;
    for (std::size_t j = 1; j < x.cols(); ++j)
        if (x.at(0, j) > x.at(0, best)) best = j;
    return best;
}

}  // namespace atmlab
