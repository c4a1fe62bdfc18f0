// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "atmlab/matrix.hpp"
#include "atmlab/rng.hpp"
#include "atmlab/tape.hpp"

namespace atmlab {

/// n task-specific memory items, each m x c. Retrieval reads them through
/// scaled-dot-product attention; training writes them back through a
/// per-slot exponential moving average. A frozen bank rejects writes.
struct MemoryBank {
    std::vector<Matrix> items;
    double alpha = 0.1;
    double epsilon_norm = 1e-8;
    bool frozen = false;

    std::size_t task_count() const { return items.size(); }
    /// m: rows per item.
    std::size_t capacity() const { return items.front().rows(); }
    /// c: columns per item, shared with the query width.
    std::size_t width() const { return items.front().cols(); }
};

/// Bank of n items with entries drawn N(0, 1/c): the same 1/sqrt(c) scale
/// as the attention logits, so initial attention is near-uniform.
MemoryBank make_memory_bank(std::size_t n, std::size_t m, std::size_t c,
                            double alpha, Rng& rng);

struct RetrievalResult {
    Matrix retrieved;  // l x c
    Matrix weights;    // l x m, rows sum to 1
};

/// W = softmax_rows(Q Mᵀ / sqrt(c)), R = W M. Never mutates the bank.
RetrievalResult retrieve(const MemoryBank& bank, std::size_t task,
                         const Matrix& queries);

/// Per-column normalization with a denominator floor: each column of the
/// result sums to 1 unless its raw sum fell below eps, in which case the
/// column is scaled by raw/eps instead of amplified.
Matrix column_normalize(const Matrix& w, double eps);

/// EMA write into item `task`: M <- alpha * (Nᵀ Q) + (1 - alpha) * M with
/// N = column_normalize(W). Every memory row moves toward a convex
/// combination of query rows. Throws StateError on a frozen bank.
void update(MemoryBank& bank, std::size_t task, const Matrix& queries,
            const Matrix& weights);

/// Two-layer relu MLP over the mean-pooled query row; the output
/// distribution routes a condition to its memory item.
struct GateClassifier {
    Matrix w1;  // c x h
    Matrix b1;  // 1 x h
    Matrix w2;  // h x n
    Matrix b2;  // 1 x n

    std::size_t input_width() const { return w1.rows(); }
    std::size_t class_count() const { return w2.cols(); }
};

GateClassifier make_gate(std::size_t c, std::size_t hidden, std::size_t n,
                         Rng& rng);

struct GateDecision {
    std::size_t task;  // argmax of probs, ties break low
    Matrix probs;      // 1 x n, sums to 1
};

GateDecision gate_predict(const GateClassifier& gate, const Matrix& queries);

/// One conditioning step: route (teacher label if given, gate otherwise),
/// retrieve, and during training also write the EMA update with the
/// retrieval's own attention weights.
RetrievalResult modulate(MemoryBank& bank, const GateClassifier& gate,
                         const Matrix& queries,
                         std::optional<std::size_t> task_label, bool training);

/// Multi-condition composition: retrieved representations stacked along
/// the row (sequence) dimension in the given order.
Matrix compose(std::span<const RetrievalResult> results);

/// Differentiable retrieval recorded on a tape; `queries` and `item` may be
/// leaves or constants, c is the shared column width for logit scaling.
struct RetrieveNodes {
    NodeId weights;
    NodeId retrieved;
};
RetrieveNodes retrieve_nodes(Tape& tape, NodeId queries, NodeId item,
                             std::size_t c);

/// Differentiable gate forward pass over a batch of pooled query rows
/// (batch x c); returns the logits node (batch x n).
NodeId gate_logits(Tape& tape, NodeId pooled_batch, NodeId w1, NodeId b1,
                   NodeId w2, NodeId b2);

}  // namespace atmlab
