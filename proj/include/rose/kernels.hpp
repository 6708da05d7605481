#pragma once

#include <cstddef>

namespace rose::kernels {

// Per-step constants for the fused AdamW element update. bias1/bias2 are the
// bias-correction denominators (1 - beta^t), computed once by the caller so
// both kernel paths consume identical values.
struct AdamwTerms {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 1e-3;
    double weight_decay = 0.0;
    double bias1 = 1.0;
    double bias2 = 1.0;
};

// A family of elementwise / reduction / matmul kernels. Every member of a
// family computes the same canonical sequence of IEEE double operations, so
// the scalar and vector implementations return bitwise-identical results.
//
// Reductions (sum, dot) use a fixed 4-lane blocked accumulation: lane l sums
// elements with index == l (mod 4), lanes combine as ((s0+s1)+(s2+s3)), and
// the remainder (n % 4) is folded into the lanes the same way by both paths.
// Matmuls vectorize only across independent outputs; the accumulation order
// along the contraction axis is a plain serial loop (matmul_nn, matmul_tn)
// or the blocked dot (matmul_nt), identical in both paths.
struct Ops {
    const char* name;

    void (*add)(double* out, const double* a, const double* b, std::size_t n);
    void (*sub)(double* out, const double* a, const double* b, std::size_t n);
    void (*mul)(double* out, const double* a, const double* b, std::size_t n);
    void (*mul_acc)(double* acc, const double* a, const double* b, std::size_t n);
    void (*axpy)(double* y, double a, const double* x, std::size_t n);
    void (*scale)(double* out, double a, const double* x, std::size_t n);

    // out[r][c] = x[r][c] + row[c], row-major.
    void (*add_rowvec)(double* out, const double* x, const double* row,
                       std::size_t rows, std::size_t cols);
    // dst[c] += sum_r src[r][c]; serial over rows.
    void (*colsum_acc)(double* dst, const double* src, std::size_t rows, std::size_t cols);

    void (*relu)(double* out, const double* x, std::size_t n);
    // dx[i] += (x[i] > 0) ? dy[i] : 0
    void (*relu_bwd_acc)(double* dx, const double* x, const double* dy, std::size_t n);
    // dx[i] += dy[i] * (1 - y[i]*y[i]), y = tanh(x) from the forward pass
    void (*tanh_bwd_acc)(double* dx, const double* y, const double* dy, std::size_t n);

    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);

    // c[m][n] = a[m][k] * b[k][n], overwrite
    void (*matmul_nn)(double* c, const double* a, const double* b,
                      std::size_t m, std::size_t k, std::size_t n);
    // c[m][n] += a[m][k] * b[n][k]^T  (b stored row-major [n][k])
    void (*matmul_nt_acc)(double* c, const double* a, const double* b,
                          std::size_t m, std::size_t k, std::size_t n);
    // c[m][n] += a[r][m]^T * b[r][n]  (a stored row-major [r][m])
    void (*matmul_tn_acc)(double* c, const double* a, const double* b,
                          std::size_t r, std::size_t m, std::size_t n);

    // out[i] = (1-t)*a[i] + t*b[i], with (1-t) computed once
    void (*lerp)(double* out, const double* a, const double* b, double t, std::size_t n);
    // out[i] = (base[i] + c1*d1[i]) + c2*d2[i]
    void (*add_scaled2)(double* out, const double* base, const double* d1,
                        const double* d2, double c1, double c2, std::size_t n);

    // gp[i] = gate*g[i] + (1-gate)*mom[i], with (1-gate) computed once
    void (*blend)(double* gp, const double* g, const double* mom, double gate, std::size_t n);
    void (*blend_elem)(double* gp, const double* g, const double* mom,
                       const double* gates, std::size_t n);

    // Fused masked AdamW element update. For each i, with gp = g[i]:
    //   m[i]  = beta1*m[i] + (1-beta1)*gp
    //   v[i]  = beta2*v[i] + (1-beta2)*(gp*gp)
    //   mhat  = m[i]/bias1,  vhat = v[i]/bias2
    //   theta[i] -= lr * (mhat/(sqrt(vhat)+eps) + weight_decay*theta[i]) * gate
    // update_norm_sq accumulates the squared applied delta via the blocked
    // 4-lane reduction.
    void (*adamw_update)(double* theta, double* m, double* v, const double* g,
                         const AdamwTerms& t, double gate, std::size_t n,
                         double* update_norm_sq);
    void (*adamw_update_elem)(double* theta, double* m, double* v, const double* g,
                              const AdamwTerms& t, const double* gates, std::size_t n,
                              double* update_norm_sq);
};

const Ops& scalar();

bool avx2_supported();
// Precondition: avx2_supported()
const Ops& avx2();

// Runtime-selected family: AVX2 when the CPU supports it, scalar otherwise.
// The ROSE_KERNELS environment variable ("scalar" or "avx2") overrides the
// choice; requesting avx2 on an unsupported CPU falls back to scalar.
const Ops& active();

}  // namespace rose::kernels
