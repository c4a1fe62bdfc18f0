// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

// AVX2 kernels. Compiled with -mavx2 in its own TU; only reached after a
// runtime CPU check. Lanes cover independent output elements and the k-loop
// order matches the scalar kernel, so results are bit-identical to scalar.
// No FMA: mul+add keeps the scalar two-rounding sequence.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "atmlab/kernels.hpp"

namespace atmlab::kernels {
namespace {

void matmul_avx2(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n * m; ++i) c[i] = 0.0;
    const std::size_t m4 = m - m % 4;
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = b + kk * m;
            const __m256d va = _mm256_set1_pd(aik);
            std::size_t j = 0;
            for (; j < m4; j += 4) {
                __m256d vc = _mm256_loadu_pd(crow + j);
                __m256d vb = _mm256_loadu_pd(brow + j);
                vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < m; ++j) crow[j] += aik * brow[j];
        }
    }
}

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(const double* a, double s, double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
    for (; i < n; ++i) out[i] = a[i] * s;
}

void axpby_avx2(double alpha, const double* x, double beta, const double* y,
                double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const __m256d vb = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        __m256d u = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(t, u));
    }
    for (; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

void relu_avx2(const double* a, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
    for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_mask_avx2(const double* x, const double* dy, double* out,
                    std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

constexpr KernelTable kAvx2Table = {
    "avx2",     matmul_avx2, add_avx2,  sub_avx2,
    mul_avx2,   scale_avx2,  axpby_avx2, relu_avx2,
    relu_mask_avx2,
};

}  // namespace

const KernelTable& avx2_table() { return kAvx2Table; }

}  // namespace atmlab::kernels

#endif  // x86_64
