#pragma once

#include <cstdint>
#include <vector>

#include "rose/model.hpp"
#include "rose/risk.hpp"
#include "rose/tensor.hpp"

namespace rose::optim {

struct AdamwHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    void validate() const;
};

struct OptimizerState {
    std::uint64_t t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static OptimizerState init(const model::ParamSet& params);
    void check_matches(const model::ParamSet& params) const;
};

// Which pass carries the classification loss when masks need dropout passes:
// the first dropout pass (default) or an extra dropout-free pass.
enum class ScePass { pass0, clean };

struct StepReport {
    std::uint64_t step = 0;
    double loss_sce = 0.0;
    double loss_kl = 0.0;
    bool kl_computed = false;
    double mask_ones_fraction = 1.0;
    double grad_norm = 0.0;
    double update_norm = 0.0;
    std::vector<double> group_update_norms;
    double mean_first_risk = 0.0;
    double mean_second_risk = 0.0;
    bool risks_computed = false;
    // Fraction of batch rows whose two dropout passes predict different
    // classes; present when the step ran a dropout-twice forward.
    double inconsistency = 0.0;
    bool inconsistency_computed = false;
};

// Reference AdamW with decoupled weight decay (the all-ones-mask baseline),
// written as plain per-element loops independent of the kernel layer.
void adamw_step(model::ParamSet& params, OptimizerState& state,
                const std::vector<Tensor>& grads, const AdamwHyper& hyper);

// One vanilla training step: single dropout forward, SCE backward, adamw_step.
StepReport vanilla_step(model::ParamSet& params, OptimizerState& state,
                        const model::ModelSpec& spec, const model::Dataset& batch,
                        const AdamwHyper& hyper, std::uint64_t seed);

// One selective step: SCE gradient, risk scores, mask, gradient blending
// g' = M*g + (J-M)*m, masked AdamW update. Throws before any state mutation
// on non-finite gradients.
StepReport rose_step(model::ParamSet& params, OptimizerState& state,
                     const model::ModelSpec& spec, const model::Dataset& batch,
                     const risk::RoseConfig& cfg, const AdamwHyper& hyper, std::uint64_t seed,
                     ScePass sce_pass = ScePass::pass0);

// One consistency-regularized step: aggregated loss 0.5*(sce0+sce1) + w*kl,
// unmasked AdamW.
StepReport rdrop_step(model::ParamSet& params, OptimizerState& state,
                      const model::ModelSpec& spec, const model::Dataset& batch,
                      const AdamwHyper& hyper, double rdrop_weight, std::uint64_t seed);

// Consistency-regularized selective step: masks come from the decoupled
// components (first-order from the KL term, second-order from the SCE term),
// while the update uses the aggregated-loss gradient.
StepReport rdrop_rose_step(model::ParamSet& params, OptimizerState& state,
                           const model::ModelSpec& spec, const model::Dataset& batch,
                           const risk::RoseConfig& cfg, const AdamwHyper& hyper,
                           double rdrop_weight, std::uint64_t seed);

}  // namespace rose::optim
