// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/adam.hpp"

#include <cmath>

#include "atmlab/errors.hpp"
#include "atmlab/kernels.hpp"

namespace atmlab {

void adam_step(AdamState& state, Matrix& param, const Matrix& grad, double lr) {
    if (!param.same_shape(grad))
        throw DimensionError("adam_step: param is " + param.shape_str() +
                             ", grad is " + grad.shape_str());
    if (!state.m.same_shape(param))
        throw DimensionError("adam_step: state is " + state.m.shape_str() +
                             ", param is " + param.shape_str());
    state.step += 1;
    const auto& k = kernels::active();
    k.axpby(state.beta1, state.m.data(), 1.0 - state.beta1, grad.data(),
            state.m.data(), state.m.size());
    Matrix g2(grad.rows(), grad.cols());
    k.mul(grad.data(), grad.data(), g2.data(), g2.size());
    k.axpby(state.beta2, state.v.data(), 1.0 - state.beta2, g2.data(),
            state.v.data(), state.v.size());
    const double c1 =
        1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 =
        1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double mhat = state.m.data()[i] / c1;
        const double vhat = state.v.data()[i] / c2;
        param.data()[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    ensure_finite(param, "adam_step");
}

}  // namespace atmlab
