#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rose/tensor.hpp"

namespace rose::autograd {

using NodeId = std::int32_t;

enum class OpKind {
    input,
    param,
    matmul,
    add_bias,
    add,
    tanh_op,
    relu_op,
    dropout,
    log_softmax,
    gather_label,
    reduce_sum,
    reduce_mean,
    weighted_sum,
    sym_kl,
};

// One recorded operation. All values are logically 2D (scalars are 1x1,
// vectors 1xN); val holds the forward activation, grad the accumulated
// adjoint, aux op-specific data (dropout mask, softmax probabilities).
struct Node {
    OpKind kind;
    NodeId in0 = -1;
    NodeId in1 = -1;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> val;
    std::vector<double> grad;
    std::vector<double> aux;
    std::vector<std::size_t> labels;
    std::vector<std::pair<double, NodeId>> terms;
    std::string name;
};

// Append-only computation record. Nodes are created in topological order, so
// the reverse sweep is a single backward pass over the node list. One tape
// may carry several forward passes sharing param nodes; backward() can be
// called repeatedly with different roots (gradients are reset each call).
class Tape {
public:
    NodeId input(const Tensor& x);
    NodeId param(const Tensor& p, std::string name);
    NodeId matmul(NodeId a, NodeId b);
    // b is a bias row broadcast over the rows of x.
    NodeId add_bias(NodeId x, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId tanh(NodeId x);
    NodeId relu(NodeId x);
    // mask entries are 0 or 1/(1-rate); the caller draws them (see rng).
    NodeId dropout(NodeId x, std::vector<double> mask);
    NodeId log_softmax(NodeId x);
    // out[r] = logp[r, labels[r]]
    NodeId gather_label(NodeId logp, std::vector<std::size_t> labels);
    NodeId reduce_sum(NodeId x);
    NodeId reduce_mean(NodeId x);
    // Scalar combination sum_i coeff_i * value(node_i); every term must be a
    // scalar node.
    NodeId weighted_sum(std::vector<std::pair<double, NodeId>> terms);
    // Mean over rows of KL(p||q) + KL(q||p) where p = exp(logp), q = exp(logq).
    // Inputs are log-probability rows (log_softmax outputs), so no floor is
    // needed: the computation stays in log space.
    NodeId sym_kl(NodeId logp, NodeId logq);

    const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }

    // Value of a scalar node.
    double value(NodeId id) const;
    const std::vector<double>& grad(NodeId id) const;

    // Reverse sweep from a scalar root. Clears every node's gradient first.
    void backward(NodeId root);

private:
    Node& mut(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }
    NodeId push(Node n);
    void check_same_shape(const Node& a, const Node& b, const char* op) const;

    std::vector<Node> nodes_;
};

}  // namespace rose::autograd
