#include "rose/probe.hpp"

#include <cmath>
#include <stdexcept>

#include "rose/rng.hpp"
#include "rose/tape.hpp"

namespace rose::probe {

void ProbeTaskSpec::validate() const {
    if (core_dim < 2) throw std::invalid_argument("probe: core_dim must be >= 2");
    if (train_size == 0 || test_size == 0) {
        throw std::invalid_argument("probe: split sizes must be positive");
    }
    if (!(noise_std >= 0.0)) throw std::invalid_argument("probe: noise_std must be >= 0");
    if (!(magnitude_factor > 1.0)) {
        throw std::invalid_argument("probe: magnitude_factor must exceed 1");
    }
}

namespace {

LabeledSet generate_split(const ProbeTaskSpec& spec, std::size_t count, bool ambiguous,
                          std::uint64_t split_tag) {
    rng::Stream stream(rng::chain(rng::domain_key(spec.seed, rng::Domain::data), split_tag));
    const std::size_t dim = spec.input_dim();
    LabeledSet set;
    set.data.x = Tensor::zeros({count, dim});
    set.data.y.resize(count);
    set.surface_flag.resize(count);

    for (std::size_t i = 0; i < count; ++i) {
        double* row = set.data.x.data.data() + i * dim;
        for (std::size_t c = 0; c < spec.core_dim; ++c) row[c] = stream.next_gaussian();

        // Force exact label balance: flip the sign of coordinate 0 when the
        // drawn signs disagree with the alternating target label.
        const std::size_t target = i % 2;
        const bool x0_pos = row[0] > 0.0;
        const bool x1_pos = row[1] > 0.0;
        if ((x0_pos != x1_pos ? 1u : 0u) != target) row[0] = -row[0];
        set.data.y[i] = target;

        const int cue = ambiguous ? static_cast<int>(target)
                                  : (stream.next_u64() & 1u ? 1 : 0);
        set.surface_flag[i] = cue;
        if (spec.surface_kind == SurfaceKind::indicator) {
            const double jitter =
                spec.noise_std > 0.0 ? spec.noise_std * stream.next_gaussian() : 0.0;
            row[spec.core_dim] = (cue == 1 ? 1.0 : -1.0) + jitter;
        } else {
            row[spec.core_dim] = 0.0;
            if (cue == 1) {
                for (std::size_t c = 0; c < spec.core_dim; ++c) {
                    row[c] *= spec.magnitude_factor;
                }
            }
        }
    }
    return set;
}

}  // namespace

std::pair<LabeledSet, LabeledSet> generate_probe_task(const ProbeTaskSpec& spec) {
    spec.validate();
    return {generate_split(spec, spec.train_size, true, 0),
            generate_split(spec, spec.test_size, false, 1)};
}

double mcc(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels) {
    if (predictions.empty() || predictions.size() != labels.size()) {
        throw std::invalid_argument("mcc: prediction/label size mismatch");
    }
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] > 1 || predictions[i] > 1) {
            throw std::invalid_argument("mcc: labels must be binary");
        }
        if (labels[i] == 1) {
            predictions[i] == 1 ? ++tp : ++fn;
        } else {
            predictions[i] == 1 ? ++fp : ++tn;
        }
    }
    const double denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom_sq == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(denom_sq);
}

double perturbation_eval(const model::ModelSpec& mspec, const model::ParamSet& params,
                         const LabeledSet& set, const ProbeTaskSpec& tspec, Perturbation kind,
                         double sigma, std::uint64_t seed) {
    model::Dataset perturbed = set.data;
    const std::size_t dim = perturbed.x.cols();
    if (kind == Perturbation::gaussian) {
        if (!(sigma >= 0.0)) throw std::invalid_argument("perturbation_eval: sigma >= 0");
        if (sigma > 0.0) {
            rng::Stream stream(rng::domain_key(seed, rng::Domain::perturb));
            for (double& v : perturbed.x.data) v += sigma * stream.next_gaussian();
        }
    } else {
        for (std::size_t i = 0; i < perturbed.y.size(); ++i) {
            double* row = perturbed.x.data.data() + i * dim;
            if (tspec.surface_kind == SurfaceKind::indicator) {
                row[tspec.core_dim] = -row[tspec.core_dim];
            } else {
                const double f = tspec.magnitude_factor;
                const double scale = set.surface_flag[i] == 1 ? 1.0 / f : f;
                for (std::size_t c = 0; c < tspec.core_dim; ++c) row[c] *= scale;
            }
        }
    }
    return model::accuracy(mspec, params, perturbed);
}

double dropout_inconsistency_ratio(const model::ModelSpec& spec, const model::ParamSet& params,
                                   const model::Dataset& batch, std::uint64_t seed,
                                   std::uint64_t step) {
    if (spec.dropout_rate <= 0.0) {
        throw std::invalid_argument("dropout_inconsistency_ratio: dropout disabled");
    }
    if (batch.y.empty()) throw std::invalid_argument("dropout_inconsistency_ratio: empty batch");
    autograd::Tape tape;
    const model::DropoutContext c0{{seed, step, 0}, spec.dropout_rate};
    const model::DropoutContext c1{{seed, step, 1}, spec.dropout_rate};
    const model::ForwardNodes f0 = model::build_forward(tape, spec, params, batch.x, &c0);
    const model::ForwardNodes f1 =
        model::build_forward(tape, spec, params, batch.x, &c1, &f0.params);
    const autograd::Node& n0 = tape.node(f0.logits);
    const autograd::Node& n1 = tape.node(f1.logits);
    const std::vector<std::size_t> p0 = model::argmax_rows(Tensor({n0.rows, n0.cols}, n0.val));
    const std::vector<std::size_t> p1 = model::argmax_rows(Tensor({n1.rows, n1.cols}, n1.val));
    std::size_t diff = 0;
    for (std::size_t i = 0; i < p0.size(); ++i) {
        if (p0[i] != p1[i]) ++diff;
    }
    return static_cast<double>(diff) / static_cast<double>(p0.size());
}

}  // namespace rose::probe
