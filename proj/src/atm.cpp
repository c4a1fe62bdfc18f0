// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/atm.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "atmlab/errors.hpp"
#include "atmlab/kernels.hpp"

namespace atmlab {
namespace {

void check_task(const MemoryBank& bank, std::size_t task, const char* op) {
    if (task >= bank.task_count())
        throw RoutingError(std::string(op) + ": task " + std::to_string(task) +
                           " out of range, bank has " +
                           std::to_string(bank.task_count()) + " items");
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                       double stddev) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = stddev * rng.next_gaussian();
    return m;
}

}  // namespace

MemoryBank make_memory_bank(std::size_t n, std::size_t m, std::size_t c,
                            double alpha, Rng& rng) {
    if (n == 0 || m == 0 || c == 0)
        throw ContractError("make_memory_bank: n, m, c must be positive");
    if (alpha < 0.0 || alpha > 1.0)
        throw ContractError("make_memory_bank: alpha must be in [0,1], got " +
                            std::to_string(alpha));
    MemoryBank bank;
    bank.alpha = alpha;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(c));
    bank.items.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        bank.items.push_back(gaussian_matrix(rng, m, c, stddev));
    return bank;
}

RetrievalResult retrieve(const MemoryBank& bank, std::size_t task,
                         const Matrix& queries) {
    check_task(bank, task, "retrieve");
    const Matrix& item = bank.items[task];
    if (queries.cols() != item.cols())
        throw DimensionError("retrieve: queries are " + queries.shape_str() +
                             ", memory item is " + item.shape_str());
    const double inv_sqrt_c =
        1.0 / std::sqrt(static_cast<double>(item.cols()));
    const Matrix weights =
        softmax_rows(scale(matmul(queries, transpose(item)), inv_sqrt_c));
    Matrix retrieved = matmul(weights, item);
    return RetrievalResult{std::move(retrieved), weights};
}

Matrix column_normalize(const Matrix& w, double eps) {
    if (eps <= 0.0)
        throw ContractError("column_normalize: eps must be positive");
    const Matrix sums = colsum(w);
    Matrix n(w.rows(), w.cols());
    for (std::size_t k = 0; k < w.cols(); ++k) {
        const double denom = std::max(sums.at(0, k), eps);
        for (std::size_t j = 0; j < w.rows(); ++j)
            n.at(j, k) = w.at(j, k) / denom;
    }
    ensure_finite(n, "column_normalize");
    return n;
}

void update(MemoryBank& bank, std::size_t task, const Matrix& queries,
            const Matrix& weights) {
    if (bank.frozen)
        throw StateError("update: bank is frozen, memory items are fixed");
    check_task(bank, task, "update");
    if (bank.alpha < 0.0 || bank.alpha > 1.0)
        throw ContractError("update: alpha must be in [0,1], got " +
                            std::to_string(bank.alpha));
    Matrix& item = bank.items[task];
    if (queries.cols() != item.cols())
        throw DimensionError("update: queries are " + queries.shape_str() +
                             ", memory item is " + item.shape_str());
    if (weights.rows() != queries.rows() || weights.cols() != item.rows())
        throw DimensionError("update: weights are " + weights.shape_str() +
                             ", expected " + std::to_string(queries.rows()) +
                             "x" + std::to_string(item.rows()));
    const Matrix n = column_normalize(weights, bank.epsilon_norm);
    const Matrix pulled = matmul(transpose(n), queries);
    kernels::active().axpby(bank.alpha, pulled.data(), 1.0 - bank.alpha,
                            item.data(), item.data(), item.size());
    ensure_finite(item, "update");
}

GateClassifier make_gate(std::size_t c, std::size_t hidden, std::size_t n,
                         Rng& rng) {
    if (c == 0 || hidden == 0 || n == 0)
        throw ContractError("make_gate: c, hidden, n must be positive");
    GateClassifier gate{
        gaussian_matrix(rng, c, hidden, 1.0 / std::sqrt(double(c))),
        Matrix(1, hidden),
        gaussian_matrix(rng, hidden, n, 1.0 / std::sqrt(double(hidden))),
        Matrix(1, n),
    };
    return gate;
}

GateDecision gate_predict(const GateClassifier& gate, const Matrix& queries) {
    if (queries.cols() != gate.input_width())
        throw DimensionError("gate_predict: queries are " +
                             queries.shape_str() + ", gate expects width " +
                             std::to_string(gate.input_width()));
    const Matrix pooled = mean_pool_rows(queries);
    const Matrix hidden = relu(add_rowvec(matmul(pooled, gate.w1), gate.b1));
    const Matrix logits = add_rowvec(matmul(hidden, gate.w2), gate.b2);
    Matrix probs = softmax_rows(logits);
    const std::size_t task = argmax_row(probs);
    return GateDecision{task, std::move(probs)};
}

RetrievalResult modulate(MemoryBank& bank, const GateClassifier& gate,
                         const Matrix& queries,
                         std::optional<std::size_t> task_label,
                         bool training) {
    if (training && bank.frozen)
        throw StateError("modulate: cannot train against a frozen bank");
    const std::size_t task =
        task_label ? *task_label : gate_predict(gate, queries).task;
    RetrievalResult result = retrieve(bank, task, queries);
    if (training) update(bank, task, queries, result.weights);
    return result;
}

Matrix compose(std::span<const RetrievalResult> results) {
    if (results.empty()) throw ContractError("compose: empty input");
    std::vector<Matrix> parts;
    parts.reserve(results.size());
    for (const RetrievalResult& r : results) parts.push_back(r.retrieved);
    return concat_rows(parts);
}

RetrieveNodes retrieve_nodes(Tape& tape, NodeId queries, NodeId item,
                             std::size_t c) {
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));
    const NodeId scores =
        tape.scale(tape.matmul(queries, tape.transpose(item)), inv_sqrt_c);
    const NodeId weights = tape.softmax_rows(scores);
    const NodeId retrieved = tape.matmul(weights, item);
    return RetrieveNodes{weights, retrieved};
}

NodeId gate_logits(Tape& tape, NodeId pooled_batch, NodeId w1, NodeId b1,
                   NodeId w2, NodeId b2) {
    const NodeId hidden =
        tape.relu(tape.add_rowvec(tape.matmul(pooled_batch, w1), b1));
    return tape.add_rowvec(tape.matmul(hidden, w2), b2);
}

}  // namespace atmlab
