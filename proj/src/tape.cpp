#include "rose/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rose/kernels.hpp"

namespace rose::autograd {

namespace {
const kernels::Ops& K() { return kernels::active(); }
}  // namespace

NodeId Tape::push(Node n) {
    n.grad.assign(n.val.size(), 0.0);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_same_shape(const Node& a, const Node& b, const char* op) const {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                                    " vs " + std::to_string(b.rows) + "x" +
                                    std::to_string(b.cols));
    }
}

NodeId Tape::input(const Tensor& x) {
    Node n;
    n.kind = OpKind::input;
    if (x.shape.size() == 2) {
        n.rows = x.shape[0];
        n.cols = x.shape[1];
    } else if (x.shape.size() == 1) {
        n.rows = 1;
        n.cols = x.shape[0];
    } else {
        throw std::invalid_argument("input: rank must be 1 or 2, got " + shape_str(x.shape));
    }
    n.val = x.data;
    return push(std::move(n));
}

NodeId Tape::param(const Tensor& p, std::string name) {
    const NodeId id = input(p);
    Node& n = mut(id);
    n.kind = OpKind::param;
    n.name = std::move(name);
    return id;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.cols != nb.rows) {
        throw std::invalid_argument("matmul: inner extents differ, " + std::to_string(na.cols) +
                                    " vs " + std::to_string(nb.rows));
    }
    Node n;
    n.kind = OpKind::matmul;
    n.in0 = a;
    n.in1 = b;
    n.rows = na.rows;
    n.cols = nb.cols;
    n.val.resize(n.rows * n.cols);
    K().matmul_nn(n.val.data(), na.val.data(), nb.val.data(), na.rows, na.cols, nb.cols);
    return push(std::move(n));
}

NodeId Tape::add_bias(NodeId x, NodeId b) {
    const Node& nx = node(x);
    const Node& nb = node(b);
    if (nb.rows != 1 || nb.cols != nx.cols) {
        throw std::invalid_argument("add_bias: bias must be 1x" + std::to_string(nx.cols));
    }
    Node n;
    n.kind = OpKind::add_bias;
    n.in0 = x;
    n.in1 = b;
    n.rows = nx.rows;
    n.cols = nx.cols;
    n.val.resize(nx.val.size());
    K().add_rowvec(n.val.data(), nx.val.data(), nb.val.data(), nx.rows, nx.cols);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    check_same_shape(na, nb, "add");
    Node n;
    n.kind = OpKind::add;
    n.in0 = a;
    n.in1 = b;
    n.rows = na.rows;
    n.cols = na.cols;
    n.val.resize(na.val.size());
    K().add(n.val.data(), na.val.data(), nb.val.data(), na.val.size());
    return push(std::move(n));
}

NodeId Tape::tanh(NodeId x) {
    const Node& nx = node(x);
    Node n;
    n.kind = OpKind::tanh_op;
    n.in0 = x;
    n.rows = nx.rows;
    n.cols = nx.cols;
    n.val.resize(nx.val.size());
    for (std::size_t i = 0; i < nx.val.size(); ++i) n.val[i] = std::tanh(nx.val[i]);
    return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
    const Node& nx = node(x);
    Node n;
    n.kind = OpKind::relu_op;
    n.in0 = x;
    n.rows = nx.rows;
    n.cols = nx.cols;
    n.val.resize(nx.val.size());
    K().relu(n.val.data(), nx.val.data(), nx.val.size());
    return push(std::move(n));
}

NodeId Tape::dropout(NodeId x, std::vector<double> mask) {
    const Node& nx = node(x);
    if (mask.size() != nx.val.size()) {
        throw std::invalid_argument("dropout: mask size " + std::to_string(mask.size()) +
                                    " vs activation size " + std::to_string(nx.val.size()));
    }
    Node n;
    n.kind = OpKind::dropout;
    n.in0 = x;
    n.rows = nx.rows;
    n.cols = nx.cols;
    n.aux = std::move(mask);
    n.val.resize(nx.val.size());
    K().mul(n.val.data(), nx.val.data(), n.aux.data(), nx.val.size());
    return push(std::move(n));
}

NodeId Tape::log_softmax(NodeId x) {
    const Node& nx = node(x);
    Node n;
    n.kind = OpKind::log_softmax;
    n.in0 = x;
    n.rows = nx.rows;
    n.cols = nx.cols;
    n.val.resize(nx.val.size());
    n.aux.resize(nx.val.size());
    for (std::size_t r = 0; r < nx.rows; ++r) {
        const double* xr = nx.val.data() + r * nx.cols;
        double* vr = n.val.data() + r * nx.cols;
        double* pr = n.aux.data() + r * nx.cols;
        double mx = xr[0];
        for (std::size_t c = 1; c < nx.cols; ++c) {
            if (xr[c] > mx) mx = xr[c];
        }
        double s = 0.0;
        for (std::size_t c = 0; c < nx.cols; ++c) s += std::exp(xr[c] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < nx.cols; ++c) {
            vr[c] = xr[c] - lse;
            pr[c] = std::exp(vr[c]);
        }
    }
    return push(std::move(n));
}

NodeId Tape::gather_label(NodeId logp, std::vector<std::size_t> labels) {
    const Node& np = node(logp);
    if (labels.size() != np.rows) {
        throw std::invalid_argument("gather_label: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(np.rows) + " rows");
    }
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= np.cols) {
            throw std::invalid_argument("gather_label: label " + std::to_string(labels[r]) +
                                        " out of range [0," + std::to_string(np.cols) + ")");
        }
    }
    Node n;
    n.kind = OpKind::gather_label;
    n.in0 = logp;
    n.rows = np.rows;
    n.cols = 1;
    n.labels = std::move(labels);
    n.val.resize(np.rows);
    for (std::size_t r = 0; r < np.rows; ++r) n.val[r] = np.val[r * np.cols + n.labels[r]];
    return push(std::move(n));
}

NodeId Tape::reduce_sum(NodeId x) {
    const Node& nx = node(x);
    Node n;
    n.kind = OpKind::reduce_sum;
    n.in0 = x;
    n.rows = 1;
    n.cols = 1;
    n.val = {K().sum(nx.val.data(), nx.val.size())};
    return push(std::move(n));
}

NodeId Tape::reduce_mean(NodeId x) {
    const Node& nx = node(x);
    Node n;
    n.kind = OpKind::reduce_mean;
    n.in0 = x;
    n.rows = 1;
    n.cols = 1;
    const double s = K().sum(nx.val.data(), nx.val.size());
    n.val = {s / static_cast<double>(nx.val.size())};
    return push(std::move(n));
}

NodeId Tape::weighted_sum(std::vector<std::pair<double, NodeId>> terms) {
    if (terms.empty()) throw std::invalid_argument("weighted_sum: no terms");
    double acc = 0.0;
    for (const auto& [coeff, id] : terms) {
        const Node& t = node(id);
        if (t.val.size() != 1) throw std::invalid_argument("weighted_sum: term not scalar");
        acc = acc + coeff * t.val[0];
    }
    Node n;
    n.kind = OpKind::weighted_sum;
    n.rows = 1;
    n.cols = 1;
    n.terms = std::move(terms);
    n.val = {acc};
    return push(std::move(n));
}

NodeId Tape::sym_kl(NodeId logp, NodeId logq) {
    const Node& np = node(logp);
    const Node& nq = node(logq);
    check_same_shape(np, nq, "sym_kl");
    double total = 0.0;
    for (std::size_t r = 0; r < np.rows; ++r) {
        const double* lp = np.val.data() + r * np.cols;
        const double* lq = nq.val.data() + r * np.cols;
        double row = 0.0;
        for (std::size_t c = 0; c < np.cols; ++c) {
            const double p = std::exp(lp[c]);
            const double q = std::exp(lq[c]);
            const double d = lp[c] - lq[c];
            const double t = (p - q) * d;
            row += t;
        }
        total += row;
    }
    Node n;
    n.kind = OpKind::sym_kl;
    n.in0 = logp;
    n.in1 = logq;
    n.rows = 1;
    n.cols = 1;
    n.val = {total / static_cast<double>(np.rows)};
    return push(std::move(n));
}

double Tape::value(NodeId id) const {
    const Node& n = node(id);
    if (n.val.size() != 1) throw std::invalid_argument("value: node is not scalar");
    return n.val[0];
}

const std::vector<double>& Tape::grad(NodeId id) const { return node(id).grad; }

void Tape::backward(NodeId root) {
    Node& r = mut(root);
    if (r.val.size() != 1) throw std::invalid_argument("backward: root is not scalar");
    for (Node& n : nodes_) {
        n.grad.assign(n.grad.size(), 0.0);
    }
    r.grad[0] = 1.0;

    for (std::size_t idx = nodes_.size(); idx-- > 0;) {
        Node& n = nodes_[idx];
        switch (n.kind) {
            case OpKind::input:
            case OpKind::param:
                break;
            case OpKind::matmul: {
                Node& a = mut(n.in0);
                Node& b = mut(n.in1);
                K().matmul_nt_acc(a.grad.data(), n.grad.data(), b.val.data(), a.rows, n.cols,
                                  a.cols);
                K().matmul_tn_acc(b.grad.data(), a.val.data(), n.grad.data(), a.rows, a.cols,
                                  n.cols);
                break;
            }
            case OpKind::add_bias: {
                Node& x = mut(n.in0);
                Node& b = mut(n.in1);
                K().axpy(x.grad.data(), 1.0, n.grad.data(), n.grad.size());
                K().colsum_acc(b.grad.data(), n.grad.data(), n.rows, n.cols);
                break;
            }
            case OpKind::add: {
                K().axpy(mut(n.in0).grad.data(), 1.0, n.grad.data(), n.grad.size());
                K().axpy(mut(n.in1).grad.data(), 1.0, n.grad.data(), n.grad.size());
                break;
            }
            case OpKind::tanh_op: {
                K().tanh_bwd_acc(mut(n.in0).grad.data(), n.val.data(), n.grad.data(),
                                 n.grad.size());
                break;
            }
            case OpKind::relu_op: {
                Node& x = mut(n.in0);
                K().relu_bwd_acc(x.grad.data(), x.val.data(), n.grad.data(), n.grad.size());
                break;
            }
            case OpKind::dropout: {
                K().mul_acc(mut(n.in0).grad.data(), n.grad.data(), n.aux.data(), n.grad.size());
                break;
            }
            case OpKind::log_softmax: {
                Node& x = mut(n.in0);
                for (std::size_t r = 0; r < n.rows; ++r) {
                    const double* ur = n.grad.data() + r * n.cols;
                    const double* pr = n.aux.data() + r * n.cols;
                    double* gr = x.grad.data() + r * n.cols;
                    double s = 0.0;
                    for (std::size_t c = 0; c < n.cols; ++c) s += ur[c];
                    for (std::size_t c = 0; c < n.cols; ++c) {
                        const double t = pr[c] * s;
                        gr[c] = gr[c] + (ur[c] - t);
                    }
                }
                break;
            }
            case OpKind::gather_label: {
                Node& p = mut(n.in0);
                for (std::size_t r = 0; r < n.rows; ++r) {
                    double& slot = p.grad[r * p.cols + n.labels[r]];
                    slot = slot + n.grad[r];
                }
                break;
            }
            case OpKind::reduce_sum: {
                Node& x = mut(n.in0);
                const double u = n.grad[0];
                for (double& gi : x.grad) gi = gi + u;
                break;
            }
            case OpKind::reduce_mean: {
                Node& x = mut(n.in0);
                const double u = n.grad[0] / static_cast<double>(x.grad.size());
                for (double& gi : x.grad) gi = gi + u;
                break;
            }
            case OpKind::weighted_sum: {
                const double u = n.grad[0];
                for (const auto& [coeff, id] : n.terms) {
                    Node& t = mut(id);
                    t.grad[0] = t.grad[0] + u * coeff;
                }
                break;
            }
            case OpKind::sym_kl: {
                Node& p = mut(n.in0);
                Node& q = mut(n.in1);
                const double base = n.grad[0] / static_cast<double>(p.rows);
                for (std::size_t i = 0; i < p.val.size(); ++i) {
                    const double pv = std::exp(p.val[i]);
                    const double qv = std::exp(q.val[i]);
                    const double d = p.val[i] - q.val[i];
                    const double diff = pv - qv;
                    p.grad[i] = p.grad[i] + base * (pv * d + diff);
                    q.grad[i] = q.grad[i] - base * (qv * d + diff);
                }
                break;
            }
        }
    }
}

}  // namespace rose::autograd
