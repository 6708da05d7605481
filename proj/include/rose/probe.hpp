#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rose/model.hpp"
#include "rose/tensor.hpp"

namespace rose::probe {

enum class SurfaceKind { indicator, magnitude };

// Synthetic core-vs-surface task. The core signal is the XOR of the signs of
// coordinates 0 and 1 (no linear shortcut); the surface cue is either an
// appended indicator coordinate or a whole-vector norm inflation. The train
// split is ambiguous (cue always agrees with the label); the test split
// assigns the cue by a fair coin.
struct ProbeTaskSpec {
    SurfaceKind surface_kind = SurfaceKind::indicator;
    std::size_t core_dim = 4;  // includes the two XOR coordinates
    double noise_std = 0.0;    // indicator-cue jitter
    std::size_t train_size = 512;
    std::size_t test_size = 2048;
    std::uint64_t seed = 1;
    double magnitude_factor = 1.5;

    void validate() const;
    // core_dim coordinates plus the surface channel.
    std::size_t input_dim() const { return core_dim + 1; }
};

struct LabeledSet {
    model::Dataset data;
    std::vector<int> surface_flag;  // the cue each example carries (0/1)
};

std::pair<LabeledSet, LabeledSet> generate_probe_task(const ProbeTaskSpec& spec);

// Binary Matthews correlation; 0 when any confusion-matrix marginal is zero.
double mcc(const std::vector<std::size_t>& predictions,
           const std::vector<std::size_t>& labels);

enum class Perturbation { gaussian, surface_flip };

// Accuracy on a perturbed copy of the set. gaussian adds sigma-scaled noise
// to every input coordinate; surface_flip negates the indicator channel or
// inverts the magnitude inflation.
double perturbation_eval(const model::ModelSpec& mspec, const model::ParamSet& params,
                         const LabeledSet& set, const ProbeTaskSpec& tspec, Perturbation kind,
                         double sigma, std::uint64_t seed);

// Fraction of examples whose two dropout-pass predictions disagree.
double dropout_inconsistency_ratio(const model::ModelSpec& spec,
                                   const model::ParamSet& params, const model::Dataset& batch,
                                   std::uint64_t seed, std::uint64_t step);

}  // namespace rose::probe
