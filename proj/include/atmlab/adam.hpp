// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "atmlab/matrix.hpp"

namespace atmlab {

/// Per-parameter Adam state: first/second moments plus a step counter that
/// increments by exactly one per apply.
struct AdamState {
    Matrix m;
    Matrix v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState(std::size_t rows, std::size_t cols) : m(rows, cols), v(rows, cols) {}
};

/// Bias-corrected Adam update, applied in place to param.
void adam_step(AdamState& state, Matrix& param, const Matrix& grad, double lr);

}  // namespace atmlab
