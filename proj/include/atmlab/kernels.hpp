// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace atmlab::kernels {

// Double-precision inner loops behind the Matrix operations. Every variant
// of a kernel must produce bit-identical output for identical input: SIMD
// lanes only cover independent output elements, the accumulation order is
// the scalar order, and the build disables FP contraction.
struct KernelTable {
    const char* name;
    // c = a * b, a: n x k, b: k x m, row-major, c preallocated n x m.
    void (*matmul)(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m);
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double s, double* out, std::size_t n);
    // out = alpha * x + beta * y
    void (*axpby)(double alpha, const double* x, double beta, const double* y,
                  double* out, std::size_t n);
    void (*relu)(const double* a, double* out, std::size_t n);
    // out[i] = x[i] > 0 ? dy[i] : 0
    void (*relu_mask)(const double* x, const double* dy, double* out,
                      std::size_t n);
};

enum class Simd { kScalar, kAvx2 };

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif

bool cpu_supports(Simd level);

// Table in use. Chosen at first call: the ATMLAB_SIMD environment variable
// ("scalar", "avx2", "auto") overrides CPU detection.
const KernelTable& active();

// Pin the active table. Throws ContractError when the CPU lacks the level.
void force(Simd level);

}  // namespace atmlab::kernels
