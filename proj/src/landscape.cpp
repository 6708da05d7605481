#include "rose/landscape.hpp"

#include <cmath>
#include <stdexcept>

#include "rose/kernels.hpp"
#include "rose/losses.hpp"
#include "rose/risk.hpp"
#include "rose/rng.hpp"

namespace rose::landscape {

namespace {

const kernels::Ops& K() { return kernels::active(); }

std::vector<double> grid_axis(double lo, double hi) {
    std::vector<double> out(kGridPoints);
    for (std::size_t i = 0; i < kGridPoints; ++i) {
        out[i] = lo + (hi - lo) * static_cast<double>(i) /
                          static_cast<double>(kGridPoints - 1);
    }
    return out;
}

}  // namespace

double dataset_loss(const model::ModelSpec& spec, const model::ParamSet& params,
                    const model::Dataset& data) {
    if (data.y.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
    autograd::Tape tape;
    const model::ForwardNodes f = model::build_forward(tape, spec, params, data.x, nullptr);
    return tape.value(losses::sce_loss(tape, f.logits, data.y));
}

double line_loss(const model::ModelSpec& spec, const model::ParamSet& a,
                 const model::ParamSet& b, double alpha, const model::Dataset& data) {
    if (!a.same_structure(b)) throw std::invalid_argument("line_loss: structure mismatch");
    model::ParamSet point = a;
    for (std::size_t g = 0; g < a.tensors.size(); ++g) {
        K().lerp(point.tensors[g].data.data(), a.tensors[g].data.data(),
                 b.tensors[g].data.data(), alpha, a.tensors[g].numel());
    }
    return dataset_loss(spec, point, data);
}

Grid1D interp_1d(const model::ModelSpec& spec, const model::ParamSet& a,
                 const model::ParamSet& b, const model::Dataset& data) {
    if (!a.same_structure(b)) throw std::invalid_argument("interp_1d: structure mismatch");
    Grid1D grid;
    grid.alphas = grid_axis(kLo1D, kHi1D);
    grid.losses.reserve(kGridPoints);
    grid.accuracies.reserve(kGridPoints);
    model::ParamSet point = a;
    for (double alpha : grid.alphas) {
        for (std::size_t g = 0; g < a.tensors.size(); ++g) {
            K().lerp(point.tensors[g].data.data(), a.tensors[g].data.data(),
                     b.tensors[g].data.data(), alpha, a.tensors[g].numel());
        }
        grid.losses.push_back(dataset_loss(spec, point, data));
        grid.accuracies.push_back(model::accuracy(spec, point, data));
    }
    return grid;
}

DirectionPair sample_directions(const model::ParamSet& params, std::uint64_t seed) {
    DirectionPair dirs;
    const std::uint64_t base = rng::domain_key(seed, rng::Domain::direction);
    for (std::size_t which = 0; which < 2; ++which) {
        std::vector<Tensor>& dest = which == 0 ? dirs.delta : dirs.eta;
        for (std::size_t g = 0; g < params.tensors.size(); ++g) {
            const Tensor& theta = params.tensors[g];
            Tensor d = Tensor::zeros(theta.shape);
            const double theta_norm = risk::frobenius_norm(theta);
            if (theta_norm > 0.0) {
                rng::Stream stream(rng::chain(rng::chain(base, which), g));
                for (double& v : d.data) v = stream.next_gaussian();
                const double d_norm = risk::frobenius_norm(d);
                const double scale = theta_norm / d_norm;
                K().scale(d.data.data(), scale, d.data.data(), d.numel());
            }
            dest.push_back(std::move(d));
        }
    }
    return dirs;
}

double surface_loss(const model::ModelSpec& spec, const model::ParamSet& params,
                    const DirectionPair& dirs, double alpha, double beta,
                    const model::Dataset& data) {
    model::ParamSet point = params;
    for (std::size_t g = 0; g < params.tensors.size(); ++g) {
        K().add_scaled2(point.tensors[g].data.data(), params.tensors[g].data.data(),
                        dirs.delta[g].data.data(), dirs.eta[g].data.data(), alpha, beta,
                        params.tensors[g].numel());
    }
    return dataset_loss(spec, point, data);
}

Grid2D surface_2d(const model::ModelSpec& spec, const model::ParamSet& params,
                  const model::Dataset& data, std::uint64_t seed, DirectionPair* dirs_out) {
    const DirectionPair dirs = sample_directions(params, seed);
    Grid2D grid;
    grid.alphas = grid_axis(kLo2D, kHi2D);
    grid.betas = grid_axis(kLo2D, kHi2D);
    grid.losses.reserve(kGridPoints * kGridPoints);
    for (double alpha : grid.alphas) {
        for (double beta : grid.betas) {
            grid.losses.push_back(surface_loss(spec, params, dirs, alpha, beta, data));
        }
    }
    if (dirs_out) *dirs_out = dirs;
    return grid;
}

FlatnessSummary flatness_summary(const Grid2D& grid) {
    const std::size_t n = grid.alphas.size();
    if (n == 0 || grid.losses.size() != n * grid.betas.size()) {
        throw std::invalid_argument("flatness_summary: malformed grid");
    }
    FlatnessSummary s;
    s.center_loss = grid.losses[(n / 2) * n + n / 2];
    double boundary_sum = 0.0;
    std::size_t boundary_count = 0;
    std::size_t basin = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double loss = grid.losses[i * n + j];
            if (i == 0 || j == 0 || i == n - 1 || j == n - 1) {
                boundary_sum += loss;
                ++boundary_count;
            }
            if (loss <= 2.0 * s.center_loss) ++basin;
        }
    }
    s.boundary_mean = boundary_sum / static_cast<double>(boundary_count);
    s.basin_fraction = static_cast<double>(basin) / static_cast<double>(n * n);
    return s;
}

}  // namespace rose::landscape
