// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

// Reference kernels. These define the numeric behavior; SIMD variants must
// reproduce them bit for bit.

#include "atmlab/kernels.hpp"

namespace atmlab::kernels {
namespace {

void matmul_scalar(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n * m; ++i) c[i] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = b + kk * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
        }
    }
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpby_scalar(double alpha, const double* x, double beta, const double* y,
                  double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

void relu_scalar(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_mask_scalar(const double* x, const double* dy, double* out,
                      std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

constexpr KernelTable kScalarTable = {
    "scalar",     matmul_scalar, add_scalar,  sub_scalar,
    mul_scalar,   scale_scalar,  axpby_scalar, relu_scalar,
    relu_mask_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalarTable; }

}  // namespace atmlab::kernels
