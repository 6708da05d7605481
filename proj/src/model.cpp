#include "rose/model.hpp"

#include <cmath>
#include <stdexcept>

namespace rose::model {

void ModelSpec::validate() const {
    if (input_dim == 0) throw std::invalid_argument("model: input_dim must be positive");
    if (classes < 2) throw std::invalid_argument("model: classes must be >= 2");
    if (hidden_dims.empty()) {
        throw std::invalid_argument("model: at least one hidden layer required");
    }
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw std::invalid_argument("model: hidden dim must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw std::invalid_argument("model: dropout_rate must be in [0,1)");
    }
}

std::size_t ParamSet::total_scalar_count() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.numel();
    return n;
}

std::size_t ParamSet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    throw std::invalid_argument("param group not found: " + name);
}

bool ParamSet::same_structure(const ParamSet& o) const {
    if (names != o.names) return false;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].shape != o.tensors[i].shape) return false;
    }
    return true;
}

ParamSet init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParamSet out;
    const std::uint64_t base = rng::domain_key(seed, rng::Domain::init);

    auto add_layer = [&](const std::string& prefix, std::size_t fan_in, std::size_t fan_out,
                         std::uint64_t layer_index) {
        rng::Stream stream(rng::chain(base, layer_index));
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor w = Tensor::zeros({fan_in, fan_out});
        for (double& v : w.data) {
            const double u = stream.next_uniform();
            v = (2.0 * u - 1.0) * scale;
        }
        out.names.push_back(prefix + ".weight");
        out.tensors.push_back(std::move(w));
        out.names.push_back(prefix + ".bias");
        out.tensors.push_back(Tensor::zeros({1, fan_out}));
    };

    std::size_t in = spec.input_dim;
    for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
        add_layer("layer" + std::to_string(l), in, spec.hidden_dims[l], l);
        in = spec.hidden_dims[l];
    }
    add_layer("out", in, spec.classes, spec.hidden_dims.size());
    return out;
}

std::vector<double> dropout_mask(const rng::DropoutKey& key, std::uint64_t site,
                                 std::size_t numel, double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("dropout_mask: rate must be in [0,1)");
    }
    std::vector<double> mask(numel);
    if (rate == 0.0) {
        for (double& m : mask) m = 1.0;
        return mask;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < numel; ++i) {
        const double u = rng::uniform01(key.element_bits(site, i));
        mask[i] = u >= rate ? keep_scale : 0.0;
    }
    return mask;
}

ForwardNodes build_forward(autograd::Tape& tape, const ModelSpec& spec, const ParamSet& params,
                           const Tensor& input, const DropoutContext* ctx,
                           const std::vector<autograd::NodeId>* reuse_params) {
    spec.validate();
    if (input.shape.size() != 2 || input.cols() != spec.input_dim) {
        throw std::invalid_argument("forward: input must be batch x " +
                                    std::to_string(spec.input_dim) + ", got " +
                                    shape_str(input.shape));
    }
    const std::size_t expected_groups = 2 * (spec.hidden_dims.size() + 1);
    if (params.group_count() != expected_groups) {
        throw std::invalid_argument("forward: param set has " +
                                    std::to_string(params.group_count()) + " groups, expected " +
                                    std::to_string(expected_groups));
    }

    ForwardNodes out;
    if (reuse_params) {
        if (reuse_params->size() != expected_groups) {
            throw std::invalid_argument("forward: reused param node list has wrong size");
        }
        out.params = *reuse_params;
    } else {
        out.params.reserve(expected_groups);
        for (std::size_t g = 0; g < params.group_count(); ++g) {
            out.params.push_back(tape.param(params.tensors[g], params.names[g]));
        }
    }

    const bool use_dropout = ctx != nullptr && ctx->rate > 0.0;
    autograd::NodeId h = tape.input(input);
    for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
        const autograd::NodeId z =
            tape.add_bias(tape.matmul(h, out.params[2 * l]), out.params[2 * l + 1]);
        h = spec.activation == Activation::tanh ? tape.tanh(z) : tape.relu(z);
        if (use_dropout) {
            const std::size_t numel = tape.node(h).val.size();
            h = tape.dropout(h, dropout_mask(ctx->key, l, numel, ctx->rate));
        }
    }
    const std::size_t g_out = 2 * spec.hidden_dims.size();
    out.logits = tape.add_bias(tape.matmul(h, out.params[g_out]), out.params[g_out + 1]);
    return out;
}

Tensor eval_logits(const ModelSpec& spec, const ParamSet& params, const Tensor& input) {
    autograd::Tape tape;
    const ForwardNodes f = build_forward(tape, spec, params, input, nullptr);
    const autograd::Node& n = tape.node(f.logits);
    return Tensor({n.rows, n.cols}, n.val);
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
    const std::size_t rows = logits.rows();
    const std::size_t cols = logits.cols();
    std::vector<std::size_t> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = logits.data.data() + r * cols;
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c) {
            if (row[c] > row[best]) best = c;
        }
        out[r] = best;
    }
    return out;
}

std::vector<std::size_t> predict(const ModelSpec& spec, const ParamSet& params,
                                 const Tensor& input) {
    return argmax_rows(eval_logits(spec, params, input));
}

double accuracy(const ModelSpec& spec, const ParamSet& params, const Dataset& data) {
    if (data.y.empty()) throw std::invalid_argument("accuracy: empty dataset");
    const std::vector<std::size_t> pred = predict(spec, params, data.x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == data.y[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace rose::model
