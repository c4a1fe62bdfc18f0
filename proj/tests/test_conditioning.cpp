// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <optional>
#include <vector>

#include "atmlab/conditioning.hpp"
#include "atmlab/errors.hpp"
#include "atmlab/matrix.hpp"
#include "atmlab/rng.hpp"
#include "atmlab/tape.hpp"
#include "gradcheck.hpp"

using namespace atmlab;

namespace {

Matrix random_row(Rng& rng, std::size_t d) {
    Matrix x(1, d);
    for (std::size_t i = 0; i < d; ++i) x.at(0, i) = rng.uniform(-2.0, 2.0);
    return x;
}

}  // namespace

TEST_CASE("encode propagates zeros") {
    Rng rng(1, 1);
    FrozenEncoder enc = make_encoder(6, 4, rng);
    enc.b = Matrix(1, 4);
    const SemanticQueryBank qbank{Matrix(3, 4)};
    const Matrix q = encode(enc, qbank, Matrix(1, 6));
    CHECK(q == Matrix(3, 4));
}

TEST_CASE("encode is deterministic and shape-checked") {
    Rng rng(2, 2);
    const FrozenEncoder enc = make_encoder(6, 4, rng);
    const SemanticQueryBank qbank = make_query_bank(3, 4, rng);
    const Matrix x = random_row(rng, 6);
    CHECK(encode(enc, qbank, x) == encode(enc, qbank, x));
    CHECK(encode(enc, qbank, x).rows() == 3);
    CHECK(encode(enc, qbank, x).cols() == 4);
    CHECK_THROWS_AS(encode(enc, qbank, Matrix(1, 5)), DimensionError);
    CHECK_THROWS_AS(encode(enc, qbank, Matrix(2, 6)), DimensionError);
}

TEST_CASE("taped encode equals the eager path and freezes the encoder") {
    Rng rng(3, 3);
    const FrozenEncoder enc = make_encoder(6, 4, rng);
    const SemanticQueryBank qbank = make_query_bank(3, 4, rng);
    const Matrix x = random_row(rng, 6);

    Tape t;
    const NodeId q0 = t.leaf(qbank.q0);
    const NodeId encoded = encode_nodes(t, enc, q0, x);
    CHECK(t.value(encoded) == encode(enc, qbank, x));

    t.backward(t.sum(encoded));
    CHECK(t.has_grad(q0));
    // The encoder weights entered as constants: they stay untracked and
    // hold no gradient after backward.
    std::size_t untracked = 0;
    for (std::uint32_t i = 0; i < t.node_count(); ++i) {
        if (t.requires_grad(NodeId{i})) continue;
        untracked += 1;
        CHECK_FALSE(t.has_grad(NodeId{i}));
        CHECK_THROWS_AS(t.grad(NodeId{i}), ContractError);
    }
    CHECK(untracked == 2);  // w_q and the x-projection row
}

TEST_CASE("gradient reaches q0 through the frozen encoder") {
    Rng rng(4, 4);
    const FrozenEncoder enc = make_encoder(5, 4, rng);
    const Matrix x = random_row(rng, 5);
    const Matrix target(3, 4);
    // Keep pre-relu values away from the kink for the finite differences.
    SemanticQueryBank qbank = make_query_bank(3, 4, rng);
    const double rel = testing::gradcheck_max_rel(
        {qbank.q0}, [&](Tape& t, const std::vector<NodeId>& in) {
            return t.mse(encode_nodes(t, enc, in[0], x), t.constant(target));
        });
    CHECK(rel < 1e-4);
}

TEST_CASE("detail tokens are block-local") {
    Rng rng(5, 5);
    const DetailBranch branch = make_detail_branch(12, 4, 4, rng);

    CHECK(detail_tokens(branch, Matrix(1, 12)) == Matrix(4, 4));

    const Matrix x = random_row(rng, 12);
    Matrix y = x;
    // Block 2 of 4 over 12 coordinates is [6, 9); nudge inside it only.
    y.at(0, 6) += 1.0;
    y.at(0, 8) -= 0.5;
    const Matrix tx = detail_tokens(branch, x);
    const Matrix ty = detail_tokens(branch, y);
    for (std::size_t k = 0; k < 4; ++k) {
        bool differs = false;
        for (std::size_t j = 0; j < 4; ++j)
            differs |= (tx.at(k, j) != ty.at(k, j));
        CHECK(differs == (k == 2));
    }
}

TEST_CASE("single detail token degenerates to a plain projection") {
    Rng rng(6, 6);
    const DetailBranch branch = make_detail_branch(8, 3, 1, rng);
    const Matrix x = random_row(rng, 8);
    const Matrix t = detail_tokens(branch, x);
    CHECK(t == relu(matmul(x, branch.w_v)));
    CHECK_THROWS_AS(detail_tokens(branch, Matrix(1, 7)), DimensionError);
    CHECK_THROWS_AS(make_detail_branch(4, 3, 5, rng), ContractError);
}

TEST_CASE("detail tokens are deterministic") {
    Rng rng(7, 7);
    const DetailBranch branch = make_detail_branch(12, 4, 3, rng);
    const Matrix x = random_row(rng, 12);
    CHECK(detail_tokens(branch, x) == detail_tokens(branch, x));
}

TEST_CASE("assemble stacks or passes through") {
    Rng rng(8, 8);
    Matrix retrieved(5, 3);
    for (std::size_t i = 0; i < retrieved.size(); ++i)
        retrieved.data()[i] = rng.uniform(-1.0, 1.0);
    Matrix details(2, 3);
    for (std::size_t i = 0; i < details.size(); ++i)
        details.data()[i] = rng.uniform(-1.0, 1.0);

    CHECK(assemble(retrieved, std::nullopt) == retrieved);

    const Matrix both = assemble(retrieved, details);
    REQUIRE(both.rows() == 7);
    CHECK(both.at(0, 0) == retrieved.at(0, 0));
    CHECK(both.at(5, 0) == details.at(0, 0));
    CHECK(both.at(6, 2) == details.at(1, 2));

    CHECK_THROWS_AS(assemble(retrieved, Matrix(2, 4)), DimensionError);
}
