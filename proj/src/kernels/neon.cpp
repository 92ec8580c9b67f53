#include "lanes.hpp"

#include <arm_neon.h>

#include <algorithm>

// NEON lane: 2-wide doubles on aarch64. Mirrors the AVX2 lane's blocking at
// half the width; equivalence-tested against the scalar reference.

namespace wegpipe::kernels {
namespace {

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

void v_gemm_nn(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    const int64_t n2 = n & ~int64_t(1);
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * lda;
        double* crow = c + i * ldc;
        for (int64_t j = 0; j < n2; j += 2) {
            float64x2_t acc = accumulate ? vld1q_f64(crow + j) : vdupq_n_f64(0.0);
            for (int64_t p = 0; p < k; ++p) {
                acc = vfmaq_n_f64(acc, vld1q_f64(b + p * ldb + j), arow[p]);
            }
            vst1q_f64(crow + j, acc);
        }
        for (int64_t j = n2; j < n; ++j) {
            double s = accumulate ? crow[j] : 0.0;
            for (int64_t p = 0; p < k; ++p) s += arow[p] * b[p * ldb + j];
            crow[j] = s;
        }
    }
}

void v_gemm_nt(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    const int64_t k2 = k & ~int64_t(1);
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * lda;
        double* crow = c + i * ldc;
        for (int64_t j = 0; j < n; ++j) {
            const double* brow = b + j * ldb;
            float64x2_t acc = vdupq_n_f64(0.0);
            for (int64_t p = 0; p < k2; p += 2) {
                acc = vfmaq_f64(acc, vld1q_f64(arow + p), vld1q_f64(brow + p));
            }
            double d = hsum(acc);
            for (int64_t p = k2; p < k; ++p) d += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + d : d;
        }
    }
}

void v_gemm_tn(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    const int64_t n2 = n & ~int64_t(1);
    if (!accumulate) {
        for (int64_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
    }
    for (int64_t p = 0; p < k; ++p) {
        const double* arow = a + p * lda;
        const double* brow = b + p * ldb;
        for (int64_t i = 0; i < m; ++i) {
            const double api = arow[i];
            double* crow = c + i * ldc;
            for (int64_t j = 0; j < n2; j += 2) {
                vst1q_f64(crow + j, vfmaq_n_f64(vld1q_f64(crow + j), vld1q_f64(brow + j), api));
            }
            for (int64_t j = n2; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void v_add(size_t n, const double* x, const double* y, double* out) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    for (; i < n; ++i) out[i] = x[i] + y[i];
}

void v_mul(size_t n, const double* x, const double* y, double* out) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

void v_scale(size_t n, double a, const double* x, double* out) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_n_f64(vld1q_f64(x + i), a));
    for (; i < n; ++i) out[i] = a * x[i];
}

void v_axpy(size_t n, double a, const double* x, double* y) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_n_f64(vld1q_f64(y + i), vld1q_f64(x + i), a));
    for (; i < n; ++i) y[i] += a * x[i];
}

double v_sum(size_t n, const double* x) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double v_max(size_t n, const double* x) {
    double m = x[0];
    size_t i = 0;
    if (n >= 2) {
        float64x2_t acc = vld1q_f64(x);
        for (i = 2; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vld1q_f64(x + i));
        m = std::max(vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1));
    } else {
        i = 1;
    }
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

void v_min_scalar(size_t n, const double* x, double cap, double* out) {
    const float64x2_t cv = vdupq_n_f64(cap);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vminq_f64(vld1q_f64(x + i), cv));
    for (; i < n; ++i) out[i] = std::min(x[i], cap);
}

void v_clamp0(size_t n, const double* x, double* out) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmaxq_f64(vld1q_f64(x + i), zero));
    for (; i < n; ++i) out[i] = std::max(x[i], 0.0);
}

const Backend kNeon = {
    "neon",  v_gemm_nn, v_gemm_nt, v_gemm_tn, v_add,        v_mul,
    v_scale, v_axpy,    v_sum,     v_max,     v_min_scalar, v_clamp0,
};

} // namespace

const Backend* neon_lane() { return &kNeon; }

} // namespace wegpipe::kernels
