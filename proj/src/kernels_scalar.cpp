#include <cmath>
#include <cstddef>

#include "kernel_common.hpp"
#include "rose/kernels.hpp"

namespace rose::kernels {
namespace {

using detail::adamw_one;
using detail::add_scaled2_one;
using detail::blend_one;
using detail::combine4;
using detail::lerp_one;

void s_add(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_mul_acc(double* acc, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double t = a[i] * b[i];
        acc[i] = acc[i] + t;
    }
}

void s_axpy(double* y, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double t = a * x[i];
        y[i] = y[i] + t;
    }
}

void s_scale(double* out, double a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void s_add_rowvec(double* out, const double* x, const double* row,
                  std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * cols;
        double* or_ = out + r * cols;
        for (std::size_t c = 0; c < cols; ++c) or_[c] = xr[c] + row[c];
    }
}

void s_colsum_acc(double* dst, const double* src, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* sr = src + r * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] = dst[c] + sr[c];
    }
}

void s_relu(double* out, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_bwd_acc(double* dx, const double* x, const double* dy, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double t = x[i] > 0.0 ? dy[i] : 0.0;
        dx[i] = dx[i] + t;
    }
}

void s_tanh_bwd_acc(double* dx, const double* y, const double* dy, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double ysq = y[i] * y[i];
        const double sech2 = 1.0 - ysq;
        const double t = dy[i] * sech2;
        dx[i] = dx[i] + t;
    }
}

double s_sum(const double* x, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) acc[i % 4] = acc[i % 4] + x[i];
    return combine4(acc);
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = a[i] * b[i];
        acc[i % 4] = acc[i % 4] + t;
    }
    return combine4(acc);
}

void s_matmul_nn(double* c, const double* a, const double* b,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double t = aip * bp[j];
                ci[j] = ci[j] + t;
            }
        }
    }
}

void s_matmul_nt_acc(double* c, const double* a, const double* b,
                     std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            ci[j] = ci[j] + s_dot(ai, b + j * k, k);
        }
    }
}

void s_matmul_tn_acc(double* c, const double* a, const double* b,
                     std::size_t r, std::size_t m, std::size_t n) {
    for (std::size_t p = 0; p < r; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double api = ap[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double t = api * bp[j];
                ci[j] = ci[j] + t;
            }
        }
    }
}

void s_lerp(double* out, const double* a, const double* b, double t, std::size_t n) {
    const double omt = 1.0 - t;
    for (std::size_t i = 0; i < n; ++i) out[i] = lerp_one(a[i], b[i], t, omt);
}

void s_add_scaled2(double* out, const double* base, const double* d1,
                   const double* d2, double c1, double c2, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = add_scaled2_one(base[i], d1[i], d2[i], c1, c2);
}

void s_blend(double* gp, const double* g, const double* mom, double gate, std::size_t n) {
    const double omg = 1.0 - gate;
    for (std::size_t i = 0; i < n; ++i) gp[i] = blend_one(g[i], mom[i], gate, omg);
}

void s_blend_elem(double* gp, const double* g, const double* mom,
                  const double* gates, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) gp[i] = blend_one(g[i], mom[i], gates[i], 1.0 - gates[i]);
}

void s_adamw_update(double* theta, double* m, double* v, const double* g,
                    const AdamwTerms& t, double gate, std::size_t n,
                    double* update_norm_sq) {
    const double om1 = 1.0 - t.beta1;
    const double om2 = 1.0 - t.beta2;
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double delta = adamw_one(theta[i], m[i], v[i], g[i], t, om1, om2, gate);
        const double dsq = delta * delta;
        acc[i % 4] = acc[i % 4] + dsq;
    }
    if (update_norm_sq) *update_norm_sq = combine4(acc);
}

void s_adamw_update_elem(double* theta, double* m, double* v, const double* g,
                         const AdamwTerms& t, const double* gates, std::size_t n,
                         double* update_norm_sq) {
    const double om1 = 1.0 - t.beta1;
    const double om2 = 1.0 - t.beta2;
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double delta = adamw_one(theta[i], m[i], v[i], g[i], t, om1, om2, gates[i]);
        const double dsq = delta * delta;
        acc[i % 4] = acc[i % 4] + dsq;
    }
    if (update_norm_sq) *update_norm_sq = combine4(acc);
}

}  // namespace

const Ops& scalar() {
    static const Ops ops = {
        "scalar",
        s_add,
        s_sub,
        s_mul,
        s_mul_acc,
        s_axpy,
        s_scale,
        s_add_rowvec,
        s_colsum_acc,
        s_relu,
        s_relu_bwd_acc,
        s_tanh_bwd_acc,
        s_sum,
        s_dot,
        s_matmul_nn,
        s_matmul_nt_acc,
        s_matmul_tn_acc,
        s_lerp,
        s_add_scaled2,
        s_blend,
        s_blend_elem,
        s_adamw_update,
        s_adamw_update_elem,
    };
    return ops;
}

}  // namespace rose::kernels
