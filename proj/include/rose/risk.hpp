#pragma once

#include <cstddef>
#include <vector>

#include "rose/tensor.hpp"

namespace rose::risk {

enum class Strategy { first, second, ensemble };
enum class Granularity { group, scalar };

struct RoseConfig {
    Strategy strategy = Strategy::ensemble;
    double c_h_first = 0.7;
    double c_h_second = 0.7;
    double gamma = 0.5;
    Granularity granularity = Granularity::group;
    double momentum_floor = 1e-12;
    bool hard_ensemble = false;

    void validate() const;
};

// Per-unit risk magnitudes in declaration order: group granularity has one
// unit per named tensor, scalar granularity one per element (groups
// flattened row-major in group order). Empty vector = not computed.
struct RiskReport {
    Granularity granularity = Granularity::group;
    std::size_t unit_count = 0;
    std::vector<double> first_order;
    std::vector<double> second_order;

    bool has_first() const { return !first_order.empty(); }
    bool has_second() const { return !second_order.empty(); }
};

// Per-unit gate values. Binary strategies emit {0,1}; the soft ensemble
// emits values from {0, gamma, 1-gamma, 1}.
struct Mask {
    std::vector<double> gates;

    double ones_fraction() const;
};

double frobenius_norm(const Tensor& t);

// Risk of hidden-space sensitivity: norm of the consistency-loss gradient.
std::vector<double> first_order_risks(const std::vector<Tensor>& kl_grads, Granularity g);

// |alpha * gn/mn - 1|, alpha the moment scaling coefficient; a momentum norm
// under the floor means no history, which counts as robust (risk 0).
double second_order_risk(double g_norm, double m_norm, double alpha, double momentum_floor);

std::vector<double> second_order_risks(const std::vector<Tensor>& grads,
                                       const std::vector<Tensor>& moments, double beta1,
                                       Granularity g, double momentum_floor);

// Select the floor(c_h * n) lowest-risk units; ties keep declaration order.
Mask rank_threshold_mask(const std::vector<double>& risks, double c_h);

Mask ensemble_mask(const Mask& mask_f, const Mask& mask_s, double gamma, bool hard_ensemble);

Mask calculate_mask(const RoseConfig& cfg, const RiskReport& report);

}  // namespace rose::risk
