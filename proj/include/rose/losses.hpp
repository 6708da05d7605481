#pragma once

#include <vector>

#include "rose/tape.hpp"
#include "rose/tensor.hpp"

namespace rose::losses {

// Batch of categorical distributions, one per row.
struct ProbDist {
    Tensor probs;

    // Rows must be non-negative and sum to 1 within 1e-12.
    void validate() const;
};

inline constexpr double kProbFloor = 1e-12;

// Mean over batch of -log softmax(logits)[label], built on the tape. The
// log-softmax node is returned through logp_out so a consistency loss can
// share it.
autograd::NodeId sce_loss(autograd::Tape& tape, autograd::NodeId logits,
                          std::vector<std::size_t> labels,
                          autograd::NodeId* logp_out = nullptr);

// Same, starting from an existing log-probability node.
autograd::NodeId sce_from_logp(autograd::Tape& tape, autograd::NodeId logp,
                               std::vector<std::size_t> labels);

// Mean over batch of KL(p||q) + KL(q||p), differentiable through both
// logits. Works in log space, so no probability floor is needed.
autograd::NodeId sym_kl_loss(autograd::Tape& tape, autograd::NodeId logits_p,
                             autograd::NodeId logits_q);

// Probability-space value of the same quantity for already-materialized
// distributions; logarithm arguments are floored at kProbFloor so paired
// zero/nonzero entries stay finite.
double sym_kl_value(const ProbDist& p, const ProbDist& q);

// 0.5*(sce0 + sce1) + w*kl.
autograd::NodeId rdrop_loss(autograd::Tape& tape, autograd::NodeId sce0, autograd::NodeId sce1,
                            autograd::NodeId kl, double weight);

}  // namespace rose::losses
