// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/tape.hpp"

#include <cmath>

#include "atmlab/errors.hpp"
#include "atmlab/kernels.hpp"

namespace atmlab {

NodeId Tape::push(Op op, bool requires_grad, std::vector<NodeId> inputs,
                  Matrix value) {
    if (backward_done_)
        throw ContractError("Tape: cannot record after backward()");
    nodes_.push_back(Node{op, requires_grad, std::move(inputs),
                          std::move(value), 0.0, {}, std::nullopt});
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(NodeId id) const {
    if (id.v >= nodes_.size()) throw ContractError("Tape: bad node id");
    return nodes_[id.v];
}

bool Tape::any_grad(std::span<const NodeId> ids) const {
    for (NodeId id : ids)
        if (node(id).requires_grad) return true;
    return false;
}

NodeId Tape::leaf(Matrix value) {
    ensure_finite(value, "Tape::leaf");
    return push(Op::kLeaf, true, {}, std::move(value));
}

NodeId Tape::constant(Matrix value) {
    ensure_finite(value, "Tape::constant");
    return push(Op::kConstant, false, {}, std::move(value));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    Matrix v = atmlab::matmul(node(a).value, node(b).value);
    return push(Op::kMatMul, any_grad({{a, b}}), {a, b}, std::move(v));
}

NodeId Tape::transpose(NodeId x) {
    Matrix v = atmlab::transpose(node(x).value);
    return push(Op::kTranspose, node(x).requires_grad, {x}, std::move(v));
}

NodeId Tape::add(NodeId a, NodeId b) {
    Matrix v = atmlab::add(node(a).value, node(b).value);
    return push(Op::kAdd, any_grad({{a, b}}), {a, b}, std::move(v));
}

NodeId Tape::add_rowvec(NodeId x, NodeId row) {
    Matrix v = atmlab::add_rowvec(node(x).value, node(row).value);
    return push(Op::kAddRowVec, any_grad({{x, row}}), {x, row}, std::move(v));
}

NodeId Tape::scale(NodeId x, double s) {
    Matrix v = atmlab::scale(node(x).value, s);
    NodeId id = push(Op::kScale, node(x).requires_grad, {x}, std::move(v));
    nodes_[id.v].scalar = s;
    return id;
}

NodeId Tape::relu(NodeId x) {
    Matrix v = atmlab::relu(node(x).value);
    return push(Op::kRelu, node(x).requires_grad, {x}, std::move(v));
}

NodeId Tape::softmax_rows(NodeId x) {
    Matrix v = atmlab::softmax_rows(node(x).value);
    return push(Op::kSoftmaxRows, node(x).requires_grad, {x}, std::move(v));
}

NodeId Tape::mean_pool_rows(NodeId x) {
    Matrix v = atmlab::mean_pool_rows(node(x).value);
    return push(Op::kMeanPoolRows, node(x).requires_grad, {x}, std::move(v));
}

NodeId Tape::concat_rows(std::span<const NodeId> parts) {
    if (parts.empty()) throw ContractError("Tape::concat_rows: empty input");
    std::vector<Matrix> values;
    values.reserve(parts.size());
    for (NodeId id : parts) values.push_back(node(id).value);
    Matrix v = atmlab::concat_rows(values);
    return push(Op::kConcatRows, any_grad(parts),
                std::vector<NodeId>(parts.begin(), parts.end()), std::move(v));
}

NodeId Tape::sum(NodeId x) {
    Matrix v(1, 1, {sum_all(node(x).value)});
    ensure_finite(v, "Tape::sum");
    return push(Op::kSum, node(x).requires_grad, {x}, std::move(v));
}

NodeId Tape::mse(NodeId pred, NodeId target) {
    Matrix v(1, 1, {atmlab::mse(node(pred).value, node(target).value)});
    ensure_finite(v, "Tape::mse");
    return push(Op::kMse, any_grad({{pred, target}}), {pred, target},
                std::move(v));
}

NodeId Tape::cross_entropy(NodeId logits, std::span<const std::size_t> labels) {
    const Matrix& z = node(logits).value;
    if (labels.size() != z.rows())
        throw ContractError("Tape::cross_entropy: " + std::to_string(labels.size()) +
                            " labels for " + std::to_string(z.rows()) + " rows");
    for (std::size_t lab : labels)
        if (lab >= z.cols())
            throw ContractError("Tape::cross_entropy: label " +
                                std::to_string(lab) + " out of range");
    Matrix probs = atmlab::softmax_rows(z);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        // log prob recomputed via log-sum-exp for stability
        double mx = z.at(i, 0);
        for (std::size_t j = 1; j < z.cols(); ++j)
            if (z.at(i, j) > mx) mx = z.at(i, j);
        double se = 0.0;
        for (std::size_t j = 0; j < z.cols(); ++j) se += std::exp(z.at(i, j) - mx);
        loss += (mx + std::log(se)) - z.at(i, labels[i]);
    }
    Matrix v(1, 1, {loss / static_cast<double>(z.rows())});
    ensure_finite(v, "Tape::cross_entropy");
    NodeId id = push(Op::kCrossEntropy, node(logits).requires_grad, {logits},
                     std::move(v));
    nodes_[id.v].labels.assign(labels.begin(), labels.end());
    nodes_[id.v].aux = std::move(probs);
    return id;
}

const Matrix& Tape::value(NodeId id) const { return node(id).value; }

bool Tape::requires_grad(NodeId id) const { return node(id).requires_grad; }

void Tape::accumulate(NodeId id, Matrix delta) {
    if (!nodes_[id.v].requires_grad) return;
    std::optional<Matrix>& g = grads_[id.v];
    if (!g) {
        g = std::move(delta);
    } else {
        kernels::active().add(g->data(), delta.data(), g->data(), g->size());
    }
}

void Tape::backward(NodeId loss) {
    const Node& ln = node(loss);
    if (ln.value.rows() != 1 || ln.value.cols() != 1)
        throw ContractError("Tape::backward: loss must be 1x1, got " +
                            ln.value.shape_str());
    if (backward_done_) throw ContractError("Tape::backward: already run");
    backward_done_ = true;
    grads_.assign(nodes_.size(), std::nullopt);
    if (!ln.requires_grad) return;  // loss independent of all leaves
    grads_[loss.v] = Matrix(1, 1, {1.0});

    for (std::size_t idx = loss.v + 1; idx-- > 0;) {
        Node& n = nodes_[idx];
        if (!n.requires_grad || !grads_[idx]) continue;
        const Matrix& g = *grads_[idx];
        switch (n.op) {
            case Op::kLeaf:
            case Op::kConstant:
                break;
            case Op::kMatMul: {
                const Matrix& a = node(n.inputs[0]).value;
                const Matrix& b = node(n.inputs[1]).value;
                if (node(n.inputs[0]).requires_grad)
                    accumulate(n.inputs[0], atmlab::matmul(g, atmlab::transpose(b)));
                if (node(n.inputs[1]).requires_grad)
                    accumulate(n.inputs[1], atmlab::matmul(atmlab::transpose(a), g));
                break;
            }
            case Op::kTranspose:
                accumulate(n.inputs[0], atmlab::transpose(g));
                break;
            case Op::kAdd:
                accumulate(n.inputs[0], g);
                accumulate(n.inputs[1], g);
                break;
            case Op::kAddRowVec:
                accumulate(n.inputs[0], g);
                if (node(n.inputs[1]).requires_grad)
                    accumulate(n.inputs[1], colsum(g));
                break;
            case Op::kScale:
                accumulate(n.inputs[0], atmlab::scale(g, n.scalar));
                break;
            case Op::kRelu: {
                const Matrix& x = node(n.inputs[0]).value;
                Matrix dx(x.rows(), x.cols());
                kernels::active().relu_mask(x.data(), g.data(), dx.data(),
                                            x.size());
                accumulate(n.inputs[0], dx);
                break;
            }
            case Op::kSoftmaxRows: {
                const Matrix& y = n.value;
                Matrix dx(y.rows(), y.cols());
                for (std::size_t i = 0; i < y.rows(); ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < y.cols(); ++j)
                        dot += g.at(i, j) * y.at(i, j);
                    for (std::size_t j = 0; j < y.cols(); ++j)
                        dx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
                }
                accumulate(n.inputs[0], dx);
                break;
            }
            case Op::kMeanPoolRows: {
                const Matrix& x = node(n.inputs[0]).value;
                const double inv = 1.0 / static_cast<double>(x.rows());
                Matrix dx(x.rows(), x.cols());
                for (std::size_t i = 0; i < x.rows(); ++i)
                    for (std::size_t j = 0; j < x.cols(); ++j)
                        dx.at(i, j) = g.at(0, j) * inv;
                accumulate(n.inputs[0], dx);
                break;
            }
            case Op::kConcatRows: {
                std::size_t row = 0;
                for (NodeId part : n.inputs) {
                    const Matrix& pv = node(part).value;
                    if (node(part).requires_grad) {
                        Matrix dp(pv.rows(), pv.cols());
                        for (std::size_t i = 0; i < pv.rows(); ++i)
                            for (std::size_t j = 0; j < pv.cols(); ++j)
                                dp.at(i, j) = g.at(row + i, j);
                        accumulate(part, dp);
                    }
                    row += pv.rows();
                }
                break;
            }
            case Op::kSum: {
                const Matrix& x = node(n.inputs[0]).value;
                Matrix dx(x.rows(), x.cols());
                for (std::size_t i = 0; i < dx.size(); ++i)
                    dx.data()[i] = g.at(0, 0);
                accumulate(n.inputs[0], dx);
                break;
            }
            case Op::kMse: {
                const Matrix& p = node(n.inputs[0]).value;
                const Matrix& t = node(n.inputs[1]).value;
                const double s =
                    g.at(0, 0) * 2.0 / static_cast<double>(p.size());
                if (node(n.inputs[0]).requires_grad) {
                    Matrix dp(p.rows(), p.cols());
                    for (std::size_t i = 0; i < p.size(); ++i)
                        dp.data()[i] = s * (p.data()[i] - t.data()[i]);
                    accumulate(n.inputs[0], dp);
                }
                if (node(n.inputs[1]).requires_grad) {
                    Matrix dt(t.rows(), t.cols());
                    for (std::size_t i = 0; i < t.size(); ++i)
                        dt.data()[i] = -s * (p.data()[i] - t.data()[i]);
                    accumulate(n.inputs[1], dt);
                }
                break;
            }
            case Op::kCrossEntropy: {
                const Matrix& probs = *n.aux;
                const double s =
                    g.at(0, 0) / static_cast<double>(probs.rows());
                Matrix dz = atmlab::scale(probs, s);
                for (std::size_t i = 0; i < probs.rows(); ++i)
                    dz.at(i, n.labels[i]) -= s;
                accumulate(n.inputs[0], dz);
                break;
            }
        }
    }
}

const Matrix& Tape::grad(NodeId id) {
    if (!backward_done_)
        throw ContractError("Tape::grad: backward() has not run");
    const Node& n = node(id);
    if (!n.requires_grad)
        throw ContractError("Tape::grad: node does not track gradients");
    std::optional<Matrix>& g = grads_[id.v];
    if (!g) g = Matrix(n.value.rows(), n.value.cols());
    return *g;
}

bool Tape::has_grad(NodeId id) const {
    return backward_done_ && node(id).requires_grad;
}

}  // namespace atmlab
