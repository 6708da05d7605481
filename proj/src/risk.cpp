#include "rose/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rose/kernels.hpp"

namespace rose::risk {

void RoseConfig::validate() const {
    if (!(c_h_first > 0.0 && c_h_first <= 1.0)) {
        throw std::invalid_argument("rose: c_h_first must be in (0,1]");
    }
    if (!(c_h_second > 0.0 && c_h_second <= 1.0)) {
        throw std::invalid_argument("rose: c_h_second must be in (0,1]");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("rose: gamma must be in (0,1)");
    }
    if (!(momentum_floor > 0.0)) {
        throw std::invalid_argument("rose: momentum_floor must be positive");
    }
}

double Mask::ones_fraction() const {
    if (gates.empty()) return 0.0;
    std::size_t ones = 0;
    for (double g : gates) {
        if (g == 1.0) ++ones;
    }
    return static_cast<double>(ones) / static_cast<double>(gates.size());
}

double frobenius_norm(const Tensor& t) {
    return std::sqrt(kernels::active().dot(t.data.data(), t.data.data(), t.data.size()));
}

std::vector<double> first_order_risks(const std::vector<Tensor>& kl_grads, Granularity g) {
    std::vector<double> out;
    if (g == Granularity::group) {
        out.reserve(kl_grads.size());
        for (const Tensor& t : kl_grads) out.push_back(frobenius_norm(t));
    } else {
        for (const Tensor& t : kl_grads) {
            for (double v : t.data) out.push_back(std::fabs(v));
        }
    }
    return out;
}

double second_order_risk(double g_norm, double m_norm, double alpha, double momentum_floor) {
    if (m_norm < momentum_floor) return 0.0;
    return std::fabs(alpha * g_norm / m_norm - 1.0);
}

std::vector<double> second_order_risks(const std::vector<Tensor>& grads,
                                       const std::vector<Tensor>& moments, double beta1,
                                       Granularity g, double momentum_floor) {
    if (grads.size() != moments.size()) {
        throw std::invalid_argument("second_order_risks: group count mismatch");
    }
    const double alpha = 1.0 - beta1;
    std::vector<double> out;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].same_shape(moments[i])) {
            throw std::invalid_argument("second_order_risks: shape mismatch in group " +
                                        std::to_string(i));
        }
        if (g == Granularity::group) {
            out.push_back(second_order_risk(frobenius_norm(grads[i]),
                                            frobenius_norm(moments[i]), alpha, momentum_floor));
        } else {
            for (std::size_t j = 0; j < grads[i].numel(); ++j) {
                out.push_back(second_order_risk(std::fabs(grads[i].data[j]),
                                                std::fabs(moments[i].data[j]), alpha,
                                                momentum_floor));
            }
        }
    }
    return out;
}

Mask rank_threshold_mask(const std::vector<double>& risks, double c_h) {
    if (risks.empty()) throw std::invalid_argument("rank_threshold_mask: empty risk list");
    if (!(c_h > 0.0 && c_h <= 1.0)) {
        throw std::invalid_argument("rank_threshold_mask: c_h must be in (0,1]");
    }
    const std::size_t n = risks.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return risks[a] < risks[b]; });
    std::size_t k = static_cast<std::size_t>(std::floor(c_h * static_cast<double>(n)));
    if (k > n) k = n;
    Mask mask;
    mask.gates.assign(n, 0.0);
    for (std::size_t i = 0; i < k; ++i) mask.gates[order[i]] = 1.0;
    return mask;
}

Mask ensemble_mask(const Mask& mask_f, const Mask& mask_s, double gamma, bool hard_ensemble) {
    if (mask_f.gates.size() != mask_s.gates.size()) {
        throw std::invalid_argument("ensemble_mask: unit sets differ");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("ensemble_mask: gamma must be in (0,1)");
    }
    Mask out;
    out.gates.resize(mask_f.gates.size());
    for (std::size_t i = 0; i < out.gates.size(); ++i) {
        const bool f = mask_f.gates[i] == 1.0;
        const bool s = mask_s.gates[i] == 1.0;
        // The four-case form keeps the value set exactly {0, gamma, 1-gamma, 1}.
        double v;
        if (f && s) {
            v = 1.0;
        } else if (f) {
            v = gamma;
        } else if (s) {
            v = 1.0 - gamma;
        } else {
            v = 0.0;
        }
        if (hard_ensemble) v = v >= 0.5 ? 1.0 : 0.0;
        out.gates[i] = v;
    }
    return out;
}

Mask calculate_mask(const RoseConfig& cfg, const RiskReport& report) {
    cfg.validate();
    if (report.unit_count == 0) throw std::invalid_argument("calculate_mask: no units");
    const auto need_first = [&] {
        if (!report.has_first() || report.first_order.size() != report.unit_count) {
            throw std::invalid_argument(
                "calculate_mask: first-order risks unavailable (requires a dropout-twice "
                "forward; dropout must be enabled)");
        }
    };
    const auto need_second = [&] {
        if (!report.has_second() || report.second_order.size() != report.unit_count) {
            throw std::invalid_argument("calculate_mask: second-order risks unavailable");
        }
    };
    switch (cfg.strategy) {
        case Strategy::first:
            need_first();
            return rank_threshold_mask(report.first_order, cfg.c_h_first);
        case Strategy::second:
            need_second();
            return rank_threshold_mask(report.second_order, cfg.c_h_second);
        case Strategy::ensemble: {
            need_first();
            need_second();
            const Mask mf = rank_threshold_mask(report.first_order, cfg.c_h_first);
            const Mask ms = rank_threshold_mask(report.second_order, cfg.c_h_second);
            return ensemble_mask(mf, ms, cfg.gamma, cfg.hard_ensemble);
        }
    }
    throw std::invalid_argument("calculate_mask: unknown strategy");
}

}  // namespace rose::risk
