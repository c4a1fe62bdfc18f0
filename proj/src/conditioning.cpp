// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/conditioning.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "atmlab/errors.hpp"

namespace atmlab {
namespace {

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                       double stddev) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = stddev * rng.next_gaussian();
    return m;
}

void check_condition(const Matrix& x, std::size_t d, const char* op) {
    if (x.rows() != 1 || x.cols() != d)
        throw DimensionError(std::string(op) + ": condition is " +
                             x.shape_str() + ", expected 1x" +
                             std::to_string(d));
}

}  // namespace

SemanticQueryBank make_query_bank(std::size_t l, std::size_t c, Rng& rng) {
    if (l == 0 || c == 0)
        throw ContractError("make_query_bank: l, c must be positive");
    return SemanticQueryBank{
        gaussian_matrix(rng, l, c, 1.0 / std::sqrt(double(c)))};
}

FrozenEncoder make_encoder(std::size_t d, std::size_t c, Rng& rng) {
    if (d == 0 || c == 0)
        throw ContractError("make_encoder: d, c must be positive");
    return FrozenEncoder{
        gaussian_matrix(rng, c, c, 1.0 / std::sqrt(double(c))),
        gaussian_matrix(rng, d, c, 1.0 / std::sqrt(double(d))),
        gaussian_matrix(rng, 1, c, 0.01),
    };
}

DetailBranch make_detail_branch(std::size_t d, std::size_t c, std::size_t v,
                                Rng& rng) {
    if (d == 0 || c == 0 || v == 0)
        throw ContractError("make_detail_branch: d, c, v must be positive");
    if (v > d)
        throw ContractError("make_detail_branch: " + std::to_string(v) +
                            " tokens need at least that many coordinates, d=" +
                            std::to_string(d));
    return DetailBranch{
        gaussian_matrix(rng, d, c, 1.0 / std::sqrt(double(d))), v};
}

Matrix encode(const FrozenEncoder& enc, const SemanticQueryBank& qbank,
              const Matrix& x) {
    check_condition(x, enc.condition_dim(), "encode");
    if (qbank.q0.cols() != enc.w_q.rows())
        throw DimensionError("encode: queries are " + qbank.q0.shape_str() +
                             ", encoder expects width " +
                             std::to_string(enc.w_q.rows()));
    const Matrix row = add(matmul(x, enc.w_x), enc.b);
    return relu(add_rowvec(matmul(qbank.q0, enc.w_q), row));
}

NodeId encode_nodes(Tape& tape, const FrozenEncoder& enc, NodeId q0,
                    const Matrix& x) {
    check_condition(x, enc.condition_dim(), "encode");
    const Matrix row = add(matmul(x, enc.w_x), enc.b);
    const NodeId mixed = tape.matmul(q0, tape.constant(enc.w_q));
    return tape.relu(tape.add_rowvec(mixed, tape.constant(row)));
}

Matrix detail_tokens(const DetailBranch& branch, const Matrix& x) {
    const std::size_t d = branch.condition_dim();
    const std::size_t v = branch.tokens_per_condition;
    check_condition(x, d, "detail_tokens");
    std::vector<Matrix> rows;
    rows.reserve(v);
    for (std::size_t k = 0; k < v; ++k) {
        const std::size_t lo = k * d / v;
        const std::size_t hi = (k + 1) * d / v;
        Matrix masked(1, d);
        for (std::size_t i = lo; i < hi; ++i) masked.at(0, i) = x.at(0, i);
        rows.push_back(relu(matmul(masked, branch.w_v)));
    }
    return concat_rows(rows);
}

Matrix assemble(const Matrix& retrieved,
                const std::optional<Matrix>& details) {
    if (!details) return retrieved;
    const Matrix parts[] = {retrieved, *details};
    return concat_rows(parts);
}

}  // namespace atmlab
