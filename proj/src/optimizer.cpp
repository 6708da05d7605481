#include "rose/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rose/kernels.hpp"
#include "rose/losses.hpp"

namespace rose::optim {

namespace {

const kernels::Ops& K() { return kernels::active(); }

std::vector<Tensor> collect_grads(const autograd::Tape& tape,
                                  const std::vector<autograd::NodeId>& param_nodes,
                                  const model::ParamSet& params) {
    std::vector<Tensor> out;
    out.reserve(param_nodes.size());
    for (std::size_t g = 0; g < param_nodes.size(); ++g) {
        out.push_back(Tensor(params.tensors[g].shape, tape.grad(param_nodes[g])));
    }
    return out;
}

void require_finite(const std::vector<Tensor>& grads, const model::ParamSet& params) {
    for (std::size_t g = 0; g < grads.size(); ++g) {
        for (double v : grads[g].data) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("step rejected: non-finite gradient in group " +
                                         params.names[g]);
            }
        }
    }
}

double global_norm(const std::vector<Tensor>& grads) {
    double sq = 0.0;
    for (const Tensor& t : grads) {
        sq += K().dot(t.data.data(), t.data.data(), t.data.size());
    }
    return std::sqrt(sq);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double disagreement(const autograd::Tape& tape, autograd::NodeId logits0,
                    autograd::NodeId logits1) {
    const autograd::Node& a = tape.node(logits0);
    const autograd::Node& b = tape.node(logits1);
    const Tensor ta({a.rows, a.cols}, a.val);
    const Tensor tb({b.rows, b.cols}, b.val);
    const std::vector<std::size_t> pa = model::argmax_rows(ta);
    const std::vector<std::size_t> pb = model::argmax_rows(tb);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i] != pb[i]) ++diff;
    }
    return static_cast<double>(diff) / static_cast<double>(pa.size());
}

// Lines 8-13 for every group: blend the gradient with the pre-update first
// moment, update the moments from the blended gradient, apply the masked
// bias-corrected update. Gates expand per granularity. Returns the global
// update norm and fills per-group norms.
double apply_masked_update(model::ParamSet& params, OptimizerState& state,
                           const std::vector<Tensor>& grads, const AdamwHyper& hyper,
                           const risk::Mask& mask, risk::Granularity granularity,
                           std::vector<double>* group_norms) {
    const std::uint64_t t_new = state.t + 1;
    kernels::AdamwTerms terms;
    terms.beta1 = hyper.beta1;
    terms.beta2 = hyper.beta2;
    terms.eps = hyper.eps;
    terms.lr = hyper.lr;
    terms.weight_decay = hyper.weight_decay;
    terms.bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t_new));
    terms.bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t_new));

    double total_sq = 0.0;
    std::vector<double> blended;
    std::size_t scalar_offset = 0;
    for (std::size_t g = 0; g < params.tensors.size(); ++g) {
        Tensor& theta = params.tensors[g];
        Tensor& m = state.m[g];
        Tensor& v = state.v[g];
        const std::size_t n = theta.numel();
        blended.resize(n);
        double sq = 0.0;
        if (granularity == risk::Granularity::group) {
            const double gate = mask.gates[g];
            K().blend(blended.data(), grads[g].data.data(), m.data.data(), gate, n);
            K().adamw_update(theta.data.data(), m.data.data(), v.data.data(), blended.data(),
                             terms, gate, n, &sq);
        } else {
            const double* gates = mask.gates.data() + scalar_offset;
            K().blend_elem(blended.data(), grads[g].data.data(), m.data.data(), gates, n);
            K().adamw_update_elem(theta.data.data(), m.data.data(), v.data.data(),
                                  blended.data(), terms, gates, n, &sq);
            scalar_offset += n;
        }
        if (group_norms) group_norms->push_back(std::sqrt(sq));
        total_sq += sq;
    }
    state.t = t_new;
    return std::sqrt(total_sq);
}

void check_batch(const model::Dataset& batch) {
    if (batch.y.empty()) throw std::invalid_argument("step: empty batch");
    if (batch.x.rows() != batch.y.size()) {
        throw std::invalid_argument("step: batch label count mismatch");
    }
}

// Update norm for the unmasked steps, taken as the parameter displacement.
double displacement_norm(const model::ParamSet& before, const model::ParamSet& after,
                         std::vector<double>* group_norms) {
    double total_sq = 0.0;
    for (std::size_t g = 0; g < before.tensors.size(); ++g) {
        const std::vector<double>& a = before.tensors[g].data;
        const std::vector<double>& b = after.tensors[g].data;
        double sq = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = b[i] - a[i];
            sq += d * d;
        }
        if (group_norms) group_norms->push_back(std::sqrt(sq));
        total_sq += sq;
    }
    return std::sqrt(total_sq);
}

}  // namespace

void AdamwHyper::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("optimizer: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("optimizer: beta1 in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("optimizer: beta2 in [0,1)");
    if (!(eps > 0.0)) throw std::invalid_argument("optimizer: eps must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("optimizer: weight_decay >= 0");
}

OptimizerState OptimizerState::init(const model::ParamSet& params) {
    OptimizerState s;
    s.m.reserve(params.tensors.size());
    s.v.reserve(params.tensors.size());
    for (const Tensor& t : params.tensors) {
        s.m.push_back(Tensor::zeros(t.shape));
        s.v.push_back(Tensor::zeros(t.shape));
    }
    return s;
}

void OptimizerState::check_matches(const model::ParamSet& params) const {
    if (m.size() != params.tensors.size() || v.size() != params.tensors.size()) {
        throw std::invalid_argument("optimizer state: group count mismatch");
    }
    for (std::size_t g = 0; g < m.size(); ++g) {
        if (m[g].shape != params.tensors[g].shape || v[g].shape != params.tensors[g].shape) {
            throw std::invalid_argument("optimizer state: shape mismatch in group " +
                                        params.names[g]);
        }
    }
}

void adamw_step(model::ParamSet& params, OptimizerState& state,
                const std::vector<Tensor>& grads, const AdamwHyper& hyper) {
    hyper.validate();
    state.check_matches(params);
    if (grads.size() != params.tensors.size()) {
        throw std::invalid_argument("adamw_step: gradient group count mismatch");
    }
    require_finite(grads, params);

    const std::uint64_t t = state.t + 1;
    const double bias1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    for (std::size_t g = 0; g < params.tensors.size(); ++g) {
        double* theta = params.tensors[g].data.data();
        double* m = state.m[g].data.data();
        double* v = state.v[g].data.data();
        const double* gr = grads[g].data.data();
        const std::size_t n = params.tensors[g].numel();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gr[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * (gr[i] * gr[i]);
            const double mhat = m[i] / bias1;
            const double vhat = v[i] / bias2;
            theta[i] = theta[i] - hyper.lr * (mhat / (std::sqrt(vhat) + hyper.eps) +
                                              hyper.weight_decay * theta[i]);
        }
    }
    state.t = t;
}

StepReport vanilla_step(model::ParamSet& params, OptimizerState& state,
                        const model::ModelSpec& spec, const model::Dataset& batch,
                        const AdamwHyper& hyper, std::uint64_t seed) {
    check_batch(batch);
    state.check_matches(params);
    const std::uint64_t step_index = state.t + 1;

    autograd::Tape tape;
    const model::DropoutContext ctx{{seed, step_index, 0}, spec.dropout_rate};
    const model::ForwardNodes f =
        model::build_forward(tape, spec, params, batch.x, spec.dropout_rate > 0.0 ? &ctx : nullptr);
    const autograd::NodeId sce = losses::sce_loss(tape, f.logits, batch.y);
    tape.backward(sce);
    const std::vector<Tensor> grads = collect_grads(tape, f.params, params);

    StepReport rep;
    rep.loss_sce = tape.value(sce);
    rep.grad_norm = global_norm(grads);
    const model::ParamSet before = params;
    adamw_step(params, state, grads, hyper);
    rep.update_norm = displacement_norm(before, params, &rep.group_update_norms);
    rep.step = state.t;
    rep.mask_ones_fraction = 1.0;
    return rep;
}

StepReport rose_step(model::ParamSet& params, OptimizerState& state,
                     const model::ModelSpec& spec, const model::Dataset& batch,
                     const risk::RoseConfig& cfg, const AdamwHyper& hyper, std::uint64_t seed,
                     ScePass sce_pass) {
    check_batch(batch);
    hyper.validate();
    cfg.validate();
    state.check_matches(params);
    const bool needs_first = cfg.strategy != risk::Strategy::second;
    if (needs_first && spec.dropout_rate <= 0.0) {
        throw std::invalid_argument(
            "rose_step: first-order risks need dropout (all risks would tie at zero)");
    }
    const std::uint64_t step_index = state.t + 1;

    autograd::Tape tape;
    const model::DropoutContext ctx0{{seed, step_index, 0}, spec.dropout_rate};
    const model::ForwardNodes f0 = model::build_forward(tape, spec, params, batch.x,
                                                        spec.dropout_rate > 0.0 ? &ctx0 : nullptr);

    autograd::NodeId logp0 = -1;
    autograd::NodeId sce;
    if (sce_pass == ScePass::clean) {
        const model::ForwardNodes fc =
            model::build_forward(tape, spec, params, batch.x, nullptr, &f0.params);
        sce = losses::sce_loss(tape, fc.logits, batch.y);
    } else {
        sce = losses::sce_loss(tape, f0.logits, batch.y, &logp0);
    }
    tape.backward(sce);
    const std::vector<Tensor> grads = collect_grads(tape, f0.params, params);
    require_finite(grads, params);

    StepReport rep;
    rep.loss_sce = tape.value(sce);
    rep.grad_norm = global_norm(grads);

    risk::RiskReport report;
    report.granularity = cfg.granularity;
    report.unit_count = cfg.granularity == risk::Granularity::group
                            ? params.group_count()
                            : params.total_scalar_count();

    if (needs_first) {
        const model::DropoutContext ctx1{{seed, step_index, 1}, spec.dropout_rate};
        const model::ForwardNodes f1 =
            model::build_forward(tape, spec, params, batch.x, &ctx1, &f0.params);
        if (logp0 < 0) logp0 = tape.log_softmax(f0.logits);
        const autograd::NodeId kl = tape.sym_kl(logp0, tape.log_softmax(f1.logits));
        rep.loss_kl = tape.value(kl);
        rep.kl_computed = true;
        rep.inconsistency = disagreement(tape, f0.logits, f1.logits);
        rep.inconsistency_computed = true;
        tape.backward(kl);
        report.first_order =
            risk::first_order_risks(collect_grads(tape, f0.params, params), cfg.granularity);
    }
    if (cfg.strategy != risk::Strategy::first) {
        report.second_order = risk::second_order_risks(grads, state.m, hyper.beta1,
                                                       cfg.granularity, cfg.momentum_floor);
    }
    rep.mean_first_risk = mean_of(report.first_order);
    rep.mean_second_risk = mean_of(report.second_order);
    rep.risks_computed = true;

    const risk::Mask mask = risk::calculate_mask(cfg, report);
    rep.mask_ones_fraction = mask.ones_fraction();
    rep.update_norm = apply_masked_update(params, state, grads, hyper, mask, cfg.granularity,
                                          &rep.group_update_norms);
    rep.step = state.t;
    return rep;
}

namespace {

// Shared two-pass construction for the consistency-trained modes.
struct TwoPassGraph {
    autograd::Tape tape;
    model::ForwardNodes f0, f1;
    autograd::NodeId sce0 = -1, sce1 = -1, kl = -1, sce_mean = -1, aggregated = -1;
};

void build_two_pass(TwoPassGraph& g, const model::ModelSpec& spec,
                    const model::ParamSet& params, const model::Dataset& batch,
                    double rdrop_weight, std::uint64_t seed, std::uint64_t step_index) {
    const bool dropout = spec.dropout_rate > 0.0;
    const model::DropoutContext ctx0{{seed, step_index, 0}, spec.dropout_rate};
    const model::DropoutContext ctx1{{seed, step_index, 1}, spec.dropout_rate};
    g.f0 = model::build_forward(g.tape, spec, params, batch.x, dropout ? &ctx0 : nullptr);
    g.f1 = model::build_forward(g.tape, spec, params, batch.x, dropout ? &ctx1 : nullptr,
                                &g.f0.params);
    autograd::NodeId logp0 = -1;
    autograd::NodeId logp1 = -1;
    g.sce0 = losses::sce_loss(g.tape, g.f0.logits, batch.y, &logp0);
    g.sce1 = losses::sce_loss(g.tape, g.f1.logits, batch.y, &logp1);
    g.kl = g.tape.sym_kl(logp0, logp1);
    g.sce_mean = g.tape.weighted_sum({{0.5, g.sce0}, {0.5, g.sce1}});
    g.aggregated = losses::rdrop_loss(g.tape, g.sce0, g.sce1, g.kl, rdrop_weight);
}

}  // namespace

StepReport rdrop_step(model::ParamSet& params, OptimizerState& state,
                      const model::ModelSpec& spec, const model::Dataset& batch,
                      const AdamwHyper& hyper, double rdrop_weight, std::uint64_t seed) {
    check_batch(batch);
    state.check_matches(params);

    TwoPassGraph g;
    build_two_pass(g, spec, params, batch, rdrop_weight, seed, state.t + 1);
    g.tape.backward(g.aggregated);
    const std::vector<Tensor> grads = collect_grads(g.tape, g.f0.params, params);

    StepReport rep;
    rep.loss_sce = g.tape.value(g.sce_mean);
    rep.loss_kl = g.tape.value(g.kl);
    rep.kl_computed = true;
    rep.inconsistency = disagreement(g.tape, g.f0.logits, g.f1.logits);
    rep.inconsistency_computed = true;
    rep.grad_norm = global_norm(grads);
    const model::ParamSet before = params;
    adamw_step(params, state, grads, hyper);
    rep.update_norm = displacement_norm(before, params, &rep.group_update_norms);
    rep.step = state.t;
    rep.mask_ones_fraction = 1.0;
    return rep;
}

StepReport rdrop_rose_step(model::ParamSet& params, OptimizerState& state,
                           const model::ModelSpec& spec, const model::Dataset& batch,
                           const risk::RoseConfig& cfg, const AdamwHyper& hyper,
                           double rdrop_weight, std::uint64_t seed) {
    check_batch(batch);
    hyper.validate();
    cfg.validate();
    state.check_matches(params);
    const bool needs_first = cfg.strategy != risk::Strategy::second;
    if (needs_first && spec.dropout_rate <= 0.0) {
        throw std::invalid_argument(
            "rdrop_rose_step: first-order risks need dropout (all risks would tie at zero)");
    }

    TwoPassGraph g;
    build_two_pass(g, spec, params, batch, rdrop_weight, seed, state.t + 1);

    StepReport rep;
    rep.loss_sce = g.tape.value(g.sce_mean);
    rep.loss_kl = g.tape.value(g.kl);
    rep.kl_computed = true;
    rep.inconsistency = disagreement(g.tape, g.f0.logits, g.f1.logits);
    rep.inconsistency_computed = true;

    risk::RiskReport report;
    report.granularity = cfg.granularity;
    report.unit_count = cfg.granularity == risk::Granularity::group
                            ? params.group_count()
                            : params.total_scalar_count();
    if (needs_first) {
        g.tape.backward(g.kl);
        report.first_order =
            risk::first_order_risks(collect_grads(g.tape, g.f0.params, params), cfg.granularity);
    }
    if (cfg.strategy != risk::Strategy::first) {
        g.tape.backward(g.sce_mean);
        report.second_order =
            risk::second_order_risks(collect_grads(g.tape, g.f0.params, params), state.m,
                                     hyper.beta1, cfg.granularity, cfg.momentum_floor);
    }
    rep.mean_first_risk = mean_of(report.first_order);
    rep.mean_second_risk = mean_of(report.second_order);
    rep.risks_computed = true;

    g.tape.backward(g.aggregated);
    const std::vector<Tensor> grads = collect_grads(g.tape, g.f0.params, params);
    require_finite(grads, params);
    rep.grad_norm = global_norm(grads);

    const risk::Mask mask = risk::calculate_mask(cfg, report);
    rep.mask_ones_fraction = mask.ones_fraction();
    rep.update_norm = apply_masked_update(params, state, grads, hyper, mask, cfg.granularity,
                                          &rep.group_update_norms);
    rep.step = state.t;
    return rep;
}

}  // namespace rose::optim
