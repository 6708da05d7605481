#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rose/rng.hpp"
#include "rose/tape.hpp"
#include "rose/tensor.hpp"

namespace rose::model {

enum class Activation { tanh, relu };

// Dropout sits after each hidden activation; site index = hidden layer index.
struct ModelSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t classes = 2;
    Activation activation = Activation::tanh;
    double dropout_rate = 0.1;

    void validate() const;
};

// Named parameter groups in declaration order: layerK.weight, layerK.bias
// for each hidden layer, then out.weight, out.bias. Group order is the unit
// order everywhere (risk reports, masks, checkpoints).
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    std::size_t group_count() const { return names.size(); }
    std::size_t total_scalar_count() const;
    std::size_t index_of(const std::string& name) const;
    bool same_structure(const ParamSet& o) const;
};

// Weights uniform in ±1/sqrt(fan_in), biases zero.
ParamSet init_params(const ModelSpec& spec, std::uint64_t seed);

struct Dataset {
    Tensor x;
    std::vector<std::size_t> y;

    std::size_t size() const { return y.size(); }
};

// Training-time forward context: present = dropout active with these keys.
struct DropoutContext {
    rng::DropoutKey key;
    double rate = 0.0;
};

struct ForwardNodes {
    autograd::NodeId logits = -1;
    std::vector<autograd::NodeId> params;  // aligned with ParamSet group order
};

// Record one forward pass on the tape. Pass ctx = nullptr (or rate 0) for the
// deterministic evaluation path. When reuse_params is non-null the pass
// shares those parameter nodes instead of creating fresh ones, so several
// passes can feed one backward sweep.
ForwardNodes build_forward(autograd::Tape& tape, const ModelSpec& spec, const ParamSet& params,
                           const Tensor& input, const DropoutContext* ctx,
                           const std::vector<autograd::NodeId>* reuse_params = nullptr);

// Inverted-scaling dropout mask: entries are 0 or 1/(1-rate), P(keep)=1-rate.
std::vector<double> dropout_mask(const rng::DropoutKey& key, std::uint64_t site,
                                 std::size_t numel, double rate);

// Evaluation-mode logits (dropout off), no tape retained.
Tensor eval_logits(const ModelSpec& spec, const ParamSet& params, const Tensor& input);

// Argmax per row; ties break toward the lower class index.
std::vector<std::size_t> argmax_rows(const Tensor& logits);
std::vector<std::size_t> predict(const ModelSpec& spec, const ParamSet& params,
                                 const Tensor& input);

double accuracy(const ModelSpec& spec, const ParamSet& params, const Dataset& data);

}  // namespace rose::model
