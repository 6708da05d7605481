#pragma once

#include <cmath>
#include <cstddef>

#include "rose/kernels.hpp"

// Canonical scalar element sequences shared by the scalar kernels and the
// remainder loops of the vector kernels. Both paths must execute exactly
// these operations in this order.

namespace rose::kernels::detail {

inline double blend_one(double g, double mom, double gate, double one_minus_gate) {
    const double t1 = gate * g;
    const double t2 = one_minus_gate * mom;
    return t1 + t2;
}

inline double lerp_one(double a, double b, double t, double one_minus_t) {
    const double t1 = one_minus_t * a;
    const double t2 = t * b;
    return t1 + t2;
}

inline double add_scaled2_one(double base, double d1, double d2, double c1, double c2) {
    const double t1 = base + c1 * d1;
    return t1 + c2 * d2;
}

// One masked AdamW element. Updates m, v, theta in place and returns the
// applied delta (theta_old - theta_new).
inline double adamw_one(double& theta, double& m, double& v, double g,
                        const AdamwTerms& t, double one_minus_beta1,
                        double one_minus_beta2, double gate) {
    const double m1 = t.beta1 * m;
    const double m2 = one_minus_beta1 * g;
    m = m1 + m2;
    const double gsq = g * g;
    const double v1 = t.beta2 * v;
    const double v2 = one_minus_beta2 * gsq;
    v = v1 + v2;
    const double mhat = m / t.bias1;
    const double vhat = v / t.bias2;
    const double den = std::sqrt(vhat) + t.eps;
    const double quot = mhat / den;
    const double decay = t.weight_decay * theta;
    const double step = t.lr * (quot + decay);
    const double delta = step * gate;
    theta = theta - delta;
    return delta;
}

// Fold the tail of a 4-lane blocked reduction: element index i goes to lane
// i % 4. `i` is the first unprocessed index.
inline double combine4(const double acc[4]) {
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

}  // namespace rose::kernels::detail
