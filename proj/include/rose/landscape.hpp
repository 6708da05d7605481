#pragma once

#include <cstdint>
#include <vector>

#include "rose/model.hpp"
#include "rose/tensor.hpp"

namespace rose::landscape {

inline constexpr std::size_t kGridPoints = 51;
inline constexpr double kLo1D = -0.5;
inline constexpr double kHi1D = 1.5;
inline constexpr double kLo2D = -0.25;
inline constexpr double kHi2D = 0.25;

struct Grid1D {
    std::vector<double> alphas;
    std::vector<double> losses;
    std::vector<double> accuracies;
};

struct Grid2D {
    std::vector<double> alphas;
    std::vector<double> betas;
    std::vector<double> losses;  // row-major [alpha][beta]
};

// Random Gaussian directions, one tensor per parameter group, rescaled so
// each group's Frobenius norm matches the corresponding parameter group
// (zero-norm groups get a zero direction).
struct DirectionPair {
    std::vector<Tensor> delta;
    std::vector<Tensor> eta;
};

struct FlatnessSummary {
    double center_loss = 0.0;
    double boundary_mean = 0.0;
    // Fraction of grid points with loss <= 2x the center loss.
    double basin_fraction = 0.0;
};

// SCE on the dataset with dropout off.
double dataset_loss(const model::ModelSpec& spec, const model::ParamSet& params,
                    const model::Dataset& data);

// L((1-alpha)*a + alpha*b); exact reproduction of L(a) at 0 and L(b) at 1.
double line_loss(const model::ModelSpec& spec, const model::ParamSet& a,
                 const model::ParamSet& b, double alpha, const model::Dataset& data);

Grid1D interp_1d(const model::ModelSpec& spec, const model::ParamSet& a,
                 const model::ParamSet& b, const model::Dataset& data);

DirectionPair sample_directions(const model::ParamSet& params, std::uint64_t seed);

// Loss at params + alpha*delta + beta*eta.
double surface_loss(const model::ModelSpec& spec, const model::ParamSet& params,
                    const DirectionPair& dirs, double alpha, double beta,
                    const model::Dataset& data);

Grid2D surface_2d(const model::ModelSpec& spec, const model::ParamSet& params,
                  const model::Dataset& data, std::uint64_t seed,
                  DirectionPair* dirs_out = nullptr);

FlatnessSummary flatness_summary(const Grid2D& grid);

}  // namespace rose::landscape
