// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>

#include "atmlab/matrix.hpp"
#include "atmlab/rng.hpp"
#include "atmlab/tape.hpp"

namespace atmlab {

/// The trainable l x c query matrix. Everything upstream of it is frozen;
/// it is the only conditioning parameter the optimizer touches.
struct SemanticQueryBank {
    Matrix q0;
};

SemanticQueryBank make_query_bank(std::size_t l, std::size_t c, Rng& rng);

/// Fixed random affine mixing of queries and condition vector. Stays
/// bit-identical for the whole run; gradients pass through it to q0.
struct FrozenEncoder {
    Matrix w_q;  // c x c
    Matrix w_x;  // d x c
    Matrix b;    // 1 x c

    std::size_t condition_dim() const { return w_x.rows(); }
    std::size_t width() const { return w_q.cols(); }
};

FrozenEncoder make_encoder(std::size_t d, std::size_t c, Rng& rng);

/// Frozen down-projection that turns one condition vector into v rows,
/// one per contiguous coordinate block. Each row sees only its block, so
/// these tokens carry exactly the information mean-pooling discards.
struct DetailBranch {
    Matrix w_v;  // d x c
    std::size_t tokens_per_condition;

    std::size_t condition_dim() const { return w_v.rows(); }
};

DetailBranch make_detail_branch(std::size_t d, std::size_t c, std::size_t v,
                                Rng& rng);

/// Q = relu(q0 w_q + broadcast(x w_x + b)), shape l x c; x is 1 x d.
Matrix encode(const FrozenEncoder& enc, const SemanticQueryBank& qbank,
              const Matrix& x);

/// Taped encode: q0 enters as the caller's node (leaf in stages 2-3),
/// encoder weights enter as constants so they never accumulate gradients.
NodeId encode_nodes(Tape& tape, const FrozenEncoder& enc, NodeId q0,
                    const Matrix& x);

/// Row k = relu((x restricted to block k) w_v), shape v x c.
Matrix detail_tokens(const DetailBranch& branch, const Matrix& x);

/// [retrieved; details] stacked by rows; details absent returns retrieved
/// unchanged (the stage-2 path runs without detail tokens).
Matrix assemble(const Matrix& retrieved,
                const std::optional<Matrix>& details);

}  // namespace atmlab
