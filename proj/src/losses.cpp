#include "rose/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace rose::losses {

void ProbDist::validate() const {
    const std::size_t rows = probs.rows();
    const std::size_t cols = probs.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = probs.at(r, c);
            if (!(v >= 0.0)) {
                throw std::invalid_argument("prob_dist: negative entry in row " +
                                            std::to_string(r));
            }
            s += v;
        }
        if (std::fabs(s - 1.0) > 1e-12) {
            throw std::invalid_argument("prob_dist: row " + std::to_string(r) +
                                        " sums to " + std::to_string(s));
        }
    }
}

autograd::NodeId sce_from_logp(autograd::Tape& tape, autograd::NodeId logp,
                               std::vector<std::size_t> labels) {
    const autograd::NodeId picked = tape.gather_label(logp, std::move(labels));
    const autograd::NodeId mean = tape.reduce_mean(picked);
    return tape.weighted_sum({{-1.0, mean}});
}

autograd::NodeId sce_loss(autograd::Tape& tape, autograd::NodeId logits,
                          std::vector<std::size_t> labels, autograd::NodeId* logp_out) {
    const autograd::NodeId logp = tape.log_softmax(logits);
    if (logp_out) *logp_out = logp;
    return sce_from_logp(tape, logp, std::move(labels));
}

autograd::NodeId sym_kl_loss(autograd::Tape& tape, autograd::NodeId logits_p,
                             autograd::NodeId logits_q) {
    return tape.sym_kl(tape.log_softmax(logits_p), tape.log_softmax(logits_q));
}

double sym_kl_value(const ProbDist& p, const ProbDist& q) {
    if (!p.probs.same_shape(q.probs)) {
        throw std::invalid_argument("sym_kl_value: shape mismatch");
    }
    p.validate();
    q.validate();
    const std::size_t rows = p.probs.rows();
    const std::size_t cols = p.probs.cols();
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double pv = p.probs.at(r, c);
            const double qv = q.probs.at(r, c);
            const double lp = std::log(pv > kProbFloor ? pv : kProbFloor);
            const double lq = std::log(qv > kProbFloor ? qv : kProbFloor);
            row += (pv - qv) * (lp - lq);
        }
        total += row;
    }
    return total / static_cast<double>(rows);
}

autograd::NodeId rdrop_loss(autograd::Tape& tape, autograd::NodeId sce0, autograd::NodeId sce1,
                            autograd::NodeId kl, double weight) {
    if (!(weight >= 0.0)) throw std::invalid_argument("rdrop_loss: weight must be >= 0");
    return tape.weighted_sum({{0.5, sce0}, {0.5, sce1}, {weight, kl}});
}

}  // namespace rose::losses
