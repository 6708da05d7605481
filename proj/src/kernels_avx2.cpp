// AVX2 variants of the kernel family. Vectorization is only across
// independent outputs or across the fixed 4-lane reduction blocks, so every
// result is bitwise identical to the scalar path. Remainder loops reuse the
// canonical scalar element sequences.

#include <immintrin.h>

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

void v_add(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_mul_acc(double* acc, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), t));
    }
    for (; i < n; ++i) {
        const double t = a[i] * b[i];
        acc[i] = acc[i] + t;
    }
}

void v_axpy(double* y, double a, const double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
    }
    for (; i < n; ++i) {
        const double t = a * x[i];
        y[i] = y[i] + t;
    }
}

void v_scale(double* out, double a, const double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) out[i] = a * x[i];
}

void v_add_rowvec(double* out, const double* x, const double* row,
                  std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * cols;
        double* or_ = out + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            _mm256_storeu_pd(or_ + c,
                             _mm256_add_pd(_mm256_loadu_pd(xr + c), _mm256_loadu_pd(row + c)));
        }
        for (; c < cols; ++c) or_[c] = xr[c] + row[c];
    }
}

void v_colsum_acc(double* dst, const double* src, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* sr = src + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            _mm256_storeu_pd(dst + c,
                             _mm256_add_pd(_mm256_loadu_pd(dst + c), _mm256_loadu_pd(sr + c)));
        }
        for (; c < cols; ++c) dst[c] = dst[c] + sr[c];
    }
}

void v_relu(double* out, const double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_bwd_acc(double* dx, const double* x, const double* dy, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d t = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), t));
    }
    for (; i < n; ++i) {
        const double t = x[i] > 0.0 ? dy[i] : 0.0;
        dx[i] = dx[i] + t;
    }
}

void v_tanh_bwd_acc(double* dx, const double* y, const double* dy, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d yv = _mm256_loadu_pd(y + i);
        const __m256d sech2 = _mm256_sub_pd(one, _mm256_mul_pd(yv, yv));
        const __m256d t = _mm256_mul_pd(_mm256_loadu_pd(dy + i), sech2);
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), t));
    }
    for (; i < n; ++i) {
        const double ysq = y[i] * y[i];
        const double sech2 = 1.0 - ysq;
        const double t = dy[i] * sech2;
        dx[i] = dx[i] + t;
    }
}

double v_sum(const double* x, std::size_t n) {
    __m256d vacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(x + i));
    double acc[4];
    _mm256_storeu_pd(acc, vacc);
    for (; i < n; ++i) acc[i % 4] = acc[i % 4] + x[i];
    return combine4(acc);
}

double v_dot(const double* a, const double* b, std::size_t n) {
    __m256d vacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        vacc = _mm256_add_pd(vacc, t);
    }
    double acc[4];
    _mm256_storeu_pd(acc, vacc);
    for (; i < n; ++i) {
        const double t = a[i] * b[i];
        acc[i % 4] = acc[i % 4] + t;
    }
    return combine4(acc);
}

void v_matmul_nn(double* c, const double* a, const double* b,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const __m256d va = _mm256_set1_pd(aip);
            const double* bp = b + p * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(bp + j));
                _mm256_storeu_pd(ci + j, _mm256_add_pd(_mm256_loadu_pd(ci + j), t));
            }
            for (; j < n; ++j) {
                const double t = aip * bp[j];
                ci[j] = ci[j] + t;
            }
        }
    }
}

void v_matmul_nt_acc(double* c, const double* a, const double* b,
                     std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            ci[j] = ci[j] + v_dot(ai, b + j * k, k);
        }
    }
}

void v_matmul_tn_acc(double* c, const double* a, const double* b,
                     std::size_t r, std::size_t m, std::size_t n) {
    for (std::size_t p = 0; p < r; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double api = ap[i];
            const __m256d va = _mm256_set1_pd(api);
            double* ci = c + i * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(bp + j));
                _mm256_storeu_pd(ci + j, _mm256_add_pd(_mm256_loadu_pd(ci + j), t));
            }
            for (; j < n; ++j) {
                const double t = api * bp[j];
                ci[j] = ci[j] + t;
            }
        }
    }
}

void v_lerp(double* out, const double* a, const double* b, double t, std::size_t n) {
    const double omt = 1.0 - t;
    const __m256d vt = _mm256_set1_pd(t);
    const __m256d vomt = _mm256_set1_pd(omt);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t1 = _mm256_mul_pd(vomt, _mm256_loadu_pd(a + i));
        const __m256d t2 = _mm256_mul_pd(vt, _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(t1, t2));
    }
    for (; i < n; ++i) out[i] = lerp_one(a[i], b[i], t, omt);
}

void v_add_scaled2(double* out, const double* base, const double* d1,
                   const double* d2, double c1, double c2, std::size_t n) {
    const __m256d vc1 = _mm256_set1_pd(c1);
    const __m256d vc2 = _mm256_set1_pd(c2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t1 =
            _mm256_add_pd(_mm256_loadu_pd(base + i), _mm256_mul_pd(vc1, _mm256_loadu_pd(d1 + i)));
        _mm256_storeu_pd(out + i,
                         _mm256_add_pd(t1, _mm256_mul_pd(vc2, _mm256_loadu_pd(d2 + i))));
    }
    for (; i < n; ++i) out[i] = add_scaled2_one(base[i], d1[i], d2[i], c1, c2);
}

void v_blend(double* gp, const double* g, const double* mom, double gate, std::size_t n) {
    const double omg = 1.0 - gate;
    const __m256d vg = _mm256_set1_pd(gate);
    const __m256d vomg = _mm256_set1_pd(omg);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t1 = _mm256_mul_pd(vg, _mm256_loadu_pd(g + i));
        const __m256d t2 = _mm256_mul_pd(vomg, _mm256_loadu_pd(mom + i));
        _mm256_storeu_pd(gp + i, _mm256_add_pd(t1, t2));
    }
    for (; i < n; ++i) gp[i] = blend_one(g[i], mom[i], gate, omg);
}

void v_blend_elem(double* gp, const double* g, const double* mom,
                  const double* gates, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vgate = _mm256_loadu_pd(gates + i);
        const __m256d vomg = _mm256_sub_pd(one, vgate);
        const __m256d t1 = _mm256_mul_pd(vgate, _mm256_loadu_pd(g + i));
        const __m256d t2 = _mm256_mul_pd(vomg, _mm256_loadu_pd(mom + i));
        _mm256_storeu_pd(gp + i, _mm256_add_pd(t1, t2));
    }
    for (; i < n; ++i) gp[i] = blend_one(g[i], mom[i], gates[i], 1.0 - gates[i]);
}

// One vectorized masked AdamW block; mirrors detail::adamw_one.
inline __m256d adamw_vec(double* theta, double* m, double* v, const double* g,
                         const AdamwTerms& t, __m256d vgate, __m256d vom1, __m256d vom2) {
    const __m256d vb1 = _mm256_set1_pd(t.beta1);
    const __m256d vb2 = _mm256_set1_pd(t.beta2);
    const __m256d vbias1 = _mm256_set1_pd(t.bias1);
    const __m256d vbias2 = _mm256_set1_pd(t.bias2);
    const __m256d veps = _mm256_set1_pd(t.eps);
    const __m256d vwd = _mm256_set1_pd(t.weight_decay);
    const __m256d vlr = _mm256_set1_pd(t.lr);

    const __m256d vg_ = _mm256_loadu_pd(g);
    const __m256d vth = _mm256_loadu_pd(theta);

    const __m256d m1 = _mm256_mul_pd(vb1, _mm256_loadu_pd(m));
    const __m256d m2 = _mm256_mul_pd(vom1, vg_);
    const __m256d vm = _mm256_add_pd(m1, m2);
    _mm256_storeu_pd(m, vm);

    const __m256d gsq = _mm256_mul_pd(vg_, vg_);
    const __m256d v1 = _mm256_mul_pd(vb2, _mm256_loadu_pd(v));
    const __m256d v2 = _mm256_mul_pd(vom2, gsq);
    const __m256d vv = _mm256_add_pd(v1, v2);
    _mm256_storeu_pd(v, vv);

    const __m256d mhat = _mm256_div_pd(vm, vbias1);
    const __m256d vhat = _mm256_div_pd(vv, vbias2);
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d quot = _mm256_div_pd(mhat, den);
    const __m256d decay = _mm256_mul_pd(vwd, vth);
    const __m256d step = _mm256_mul_pd(vlr, _mm256_add_pd(quot, decay));
    const __m256d delta = _mm256_mul_pd(step, vgate);
    _mm256_storeu_pd(theta, _mm256_sub_pd(vth, delta));
    return delta;
}

void v_adamw_update(double* theta, double* m, double* v, const double* g,
                    const AdamwTerms& t, double gate, std::size_t n,
                    double* update_norm_sq) {
    const double om1 = 1.0 - t.beta1;
    const double om2 = 1.0 - t.beta2;
    const __m256d vgate = _mm256_set1_pd(gate);
    const __m256d vom1 = _mm256_set1_pd(om1);
    const __m256d vom2 = _mm256_set1_pd(om2);
    __m256d vacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d delta = adamw_vec(theta + i, m + i, v + i, g + i, t, vgate, vom1, vom2);
        vacc = _mm256_add_pd(vacc, _mm256_mul_pd(delta, delta));
    }
    double acc[4];
    _mm256_storeu_pd(acc, vacc);
    for (; i < n; ++i) {
        const double delta = adamw_one(theta[i], m[i], v[i], g[i], t, om1, om2, gate);
        const double dsq = delta * delta;
        acc[i % 4] = acc[i % 4] + dsq;
    }
    if (update_norm_sq) *update_norm_sq = combine4(acc);
}

void v_adamw_update_elem(double* theta, double* m, double* v, const double* g,
                         const AdamwTerms& t, const double* gates, std::size_t n,
                         double* update_norm_sq) {
    const double om1 = 1.0 - t.beta1;
    const double om2 = 1.0 - t.beta2;
    const __m256d vom1 = _mm256_set1_pd(om1);
    const __m256d vom2 = _mm256_set1_pd(om2);
    __m256d vacc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vgate = _mm256_loadu_pd(gates + i);
        const __m256d delta = adamw_vec(theta + i, m + i, v + i, g + i, t, vgate, vom1, vom2);
        vacc = _mm256_add_pd(vacc, _mm256_mul_pd(delta, delta));
    }
    double acc[4];
    _mm256_storeu_pd(acc, vacc);
    for (; i < n; ++i) {
        const double delta = adamw_one(theta[i], m[i], v[i], g[i], t, om1, om2, gates[i]);
        const double dsq = delta * delta;
        acc[i % 4] = acc[i % 4] + dsq;
    }
    if (update_norm_sq) *update_norm_sq = combine4(acc);
}

}  // namespace

bool avx2_supported() { return __builtin_cpu_supports("avx2") != 0; }

const Ops& avx2() {
    static const Ops ops = {
        "avx2",
        v_add,
        v_sub,
        v_mul,
        v_mul_acc,
        v_axpy,
        v_scale,
        v_add_rowvec,
        v_colsum_acc,
        v_relu,
        v_relu_bwd_acc,
        v_tanh_bwd_acc,
        v_sum,
        v_dot,
        v_matmul_nn,
        v_matmul_nt_acc,
        v_matmul_tn_acc,
        v_lerp,
        v_add_scaled2,
        v_blend,
        v_blend_elem,
        v_adamw_update,
        v_adamw_update_elem,
    };
    return ops;
}

}  // namespace rose::kernels
