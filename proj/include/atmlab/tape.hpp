// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "atmlab/matrix.hpp"

namespace atmlab {

struct NodeId {
    std::uint32_t v;
};

/// Reverse-mode tape over the closed op set the training stages need.
/// Nodes are recorded in topological order (inputs exist before use);
/// backward walks them once, in reverse. Leaves are trainable parameters,
/// constants never accumulate gradients.
class Tape {
  public:
    NodeId leaf(Matrix value);
    NodeId constant(Matrix value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId x);
    NodeId add(NodeId a, NodeId b);
    /// row (1 x c) broadcast-added to every row of x.
    NodeId add_rowvec(NodeId x, NodeId row);
    NodeId scale(NodeId x, double s);
    NodeId relu(NodeId x);
    NodeId softmax_rows(NodeId x);
    NodeId mean_pool_rows(NodeId x);
    NodeId concat_rows(std::span<const NodeId> parts);
    /// Total of all entries, 1x1.
    NodeId sum(NodeId x);
    /// Mean squared error over all entries, 1x1.
    NodeId mse(NodeId pred, NodeId target);
    /// Mean negative log-likelihood of softmax(logits) at labels, 1x1.
    NodeId cross_entropy(NodeId logits, std::span<const std::size_t> labels);

    const Matrix& value(NodeId id) const;
    bool requires_grad(NodeId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    /// Accumulates d(loss)/d(node) for every gradient-tracked node.
    /// loss must be 1x1.
    void backward(NodeId loss);

    /// Gradient of the last backward() loss w.r.t. this node. Only valid
    /// for gradient-tracked nodes after backward().
    const Matrix& grad(NodeId id);
    bool has_grad(NodeId id) const;

  private:
    enum class Op : std::uint8_t {
        kLeaf,
        kConstant,
        kMatMul,
        kTranspose,
        kAdd,
        kAddRowVec,
        kScale,
        kRelu,
        kSoftmaxRows,
        kMeanPoolRows,
        kConcatRows,
        kSum,
        kMse,
        kCrossEntropy,
    };

    struct Node {
        Op op;
        bool requires_grad;
        std::vector<NodeId> inputs;
        Matrix value;
        double scalar = 0.0;                // kScale factor
        std::vector<std::size_t> labels;    // kCrossEntropy
        std::optional<Matrix> aux;          // kCrossEntropy softmax cache
    };

    NodeId push(Op op, bool requires_grad, std::vector<NodeId> inputs,
                Matrix value);
    const Node& node(NodeId id) const;
    bool any_grad(std::span<const NodeId> ids) const;
    void accumulate(NodeId id, Matrix delta);

    std::vector<Node> nodes_;
    std::vector<std::optional<Matrix>> grads_;
    bool backward_done_ = false;
};

}  // namespace atmlab
