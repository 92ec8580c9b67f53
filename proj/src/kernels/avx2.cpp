#include "lanes.hpp"

#include <immintrin.h>

#include <algorithm>

// AVX2+FMA lane: 4-wide doubles, register-blocked GEMM microkernels.
// Accumulation order differs from the scalar lane inside dot products, so
// GEMM results match the reference to rounding, not bit-for-bit; the
// elementwise kernels are exact.

namespace wegpipe::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void v_gemm_nn(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    const int64_t n4 = n & ~int64_t(3);
    int64_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + (i + 0) * lda;
        const double* a1 = a + (i + 1) * lda;
        const double* a2 = a + (i + 2) * lda;
        const double* a3 = a + (i + 3) * lda;
        double* c0 = c + (i + 0) * ldc;
        double* c1 = c + (i + 1) * ldc;
        double* c2 = c + (i + 2) * ldc;
        double* c3 = c + (i + 3) * ldc;
        for (int64_t j = 0; j < n4; j += 4) {
            __m256d acc0, acc1, acc2, acc3;
            if (accumulate) {
                acc0 = _mm256_loadu_pd(c0 + j);
                acc1 = _mm256_loadu_pd(c1 + j);
                acc2 = _mm256_loadu_pd(c2 + j);
                acc3 = _mm256_loadu_pd(c3 + j);
            } else {
                acc0 = acc1 = acc2 = acc3 = _mm256_setzero_pd();
            }
            for (int64_t p = 0; p < k; ++p) {
                const __m256d bv = _mm256_loadu_pd(b + p * ldb + j);
                acc0 = _mm256_fmadd_pd(_mm256_set1_pd(a0[p]), bv, acc0);
                acc1 = _mm256_fmadd_pd(_mm256_set1_pd(a1[p]), bv, acc1);
                acc2 = _mm256_fmadd_pd(_mm256_set1_pd(a2[p]), bv, acc2);
                acc3 = _mm256_fmadd_pd(_mm256_set1_pd(a3[p]), bv, acc3);
            }
            _mm256_storeu_pd(c0 + j, acc0);
            _mm256_storeu_pd(c1 + j, acc1);
            _mm256_storeu_pd(c2 + j, acc2);
            _mm256_storeu_pd(c3 + j, acc3);
        }
        for (int64_t j = n4; j < n; ++j) {
            double s0 = accumulate ? c0[j] : 0.0, s1 = accumulate ? c1[j] : 0.0;
            double s2 = accumulate ? c2[j] : 0.0, s3 = accumulate ? c3[j] : 0.0;
            for (int64_t p = 0; p < k; ++p) {
                const double bv = b[p * ldb + j];
                s0 += a0[p] * bv;
                s1 += a1[p] * bv;
                s2 += a2[p] * bv;
                s3 += a3[p] * bv;
            }
            c0[j] = s0;
            c1[j] = s1;
            c2[j] = s2;
            c3[j] = s3;
        }
    }
    for (; i < m; ++i) {
        const double* arow = a + i * lda;
        double* crow = c + i * ldc;
        for (int64_t j = 0; j < n4; j += 4) {
            __m256d acc = accumulate ? _mm256_loadu_pd(crow + j) : _mm256_setzero_pd();
            for (int64_t p = 0; p < k; ++p) {
                acc = _mm256_fmadd_pd(_mm256_set1_pd(arow[p]), _mm256_loadu_pd(b + p * ldb + j), acc);
            }
            _mm256_storeu_pd(crow + j, acc);
        }
        for (int64_t j = n4; j < n; ++j) {
            double s = accumulate ? crow[j] : 0.0;
            for (int64_t p = 0; p < k; ++p) s += arow[p] * b[p * ldb + j];
            crow[j] = s;
        }
    }
}

void v_gemm_nt(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    const int64_t k4 = k & ~int64_t(3);
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * lda;
        double* crow = c + i * ldc;
        int64_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + (j + 0) * ldb;
            const double* b1 = b + (j + 1) * ldb;
            const double* b2 = b + (j + 2) * ldb;
            const double* b3 = b + (j + 3) * ldb;
            __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
            __m256d acc2 = _mm256_setzero_pd(), acc3 = _mm256_setzero_pd();
            for (int64_t p = 0; p < k4; p += 4) {
                const __m256d av = _mm256_loadu_pd(arow + p);
                acc0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), acc0);
                acc1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), acc1);
                acc2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), acc2);
                acc3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), acc3);
            }
            double d0 = hsum(acc0), d1 = hsum(acc1), d2 = hsum(acc2), d3 = hsum(acc3);
            for (int64_t p = k4; p < k; ++p) {
                const double av = arow[p];
                d0 += av * b0[p];
                d1 += av * b1[p];
                d2 += av * b2[p];
                d3 += av * b3[p];
            }
            if (accumulate) {
                crow[j + 0] += d0;
                crow[j + 1] += d1;
                crow[j + 2] += d2;
                crow[j + 3] += d3;
            } else {
                crow[j + 0] = d0;
                crow[j + 1] = d1;
                crow[j + 2] = d2;
                crow[j + 3] = d3;
            }
        }
        for (; j < n; ++j) {
            const double* brow = b + j * ldb;
            __m256d acc = _mm256_setzero_pd();
            for (int64_t p = 0; p < k4; p += 4) {
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc);
            }
            double d = hsum(acc);
            for (int64_t p = k4; p < k; ++p) d += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + d : d;
        }
    }
}

void v_gemm_tn(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    const int64_t n4 = n & ~int64_t(3);
    int64_t i = 0;
    for (; i + 4 <= m; i += 4) {
        double* c0 = c + (i + 0) * ldc;
        double* c1 = c + (i + 1) * ldc;
        double* c2 = c + (i + 2) * ldc;
        double* c3 = c + (i + 3) * ldc;
        for (int64_t j = 0; j < n4; j += 4) {
            __m256d acc0, acc1, acc2, acc3;
            if (accumulate) {
                acc0 = _mm256_loadu_pd(c0 + j);
                acc1 = _mm256_loadu_pd(c1 + j);
                acc2 = _mm256_loadu_pd(c2 + j);
                acc3 = _mm256_loadu_pd(c3 + j);
            } else {
                acc0 = acc1 = acc2 = acc3 = _mm256_setzero_pd();
            }
            for (int64_t p = 0; p < k; ++p) {
                const double* acol = a + p * lda + i;
                const __m256d bv = _mm256_loadu_pd(b + p * ldb + j);
                acc0 = _mm256_fmadd_pd(_mm256_set1_pd(acol[0]), bv, acc0);
                acc1 = _mm256_fmadd_pd(_mm256_set1_pd(acol[1]), bv, acc1);
                acc2 = _mm256_fmadd_pd(_mm256_set1_pd(acol[2]), bv, acc2);
                acc3 = _mm256_fmadd_pd(_mm256_set1_pd(acol[3]), bv, acc3);
            }
            _mm256_storeu_pd(c0 + j, acc0);
            _mm256_storeu_pd(c1 + j, acc1);
            _mm256_storeu_pd(c2 + j, acc2);
            _mm256_storeu_pd(c3 + j, acc3);
        }
        for (int64_t j = n4; j < n; ++j) {
            double s0 = accumulate ? c0[j] : 0.0, s1 = accumulate ? c1[j] : 0.0;
            double s2 = accumulate ? c2[j] : 0.0, s3 = accumulate ? c3[j] : 0.0;
            for (int64_t p = 0; p < k; ++p) {
                const double bv = b[p * ldb + j];
                const double* acol = a + p * lda + i;
                s0 += acol[0] * bv;
                s1 += acol[1] * bv;
                s2 += acol[2] * bv;
                s3 += acol[3] * bv;
            }
            c0[j] = s0;
            c1[j] = s1;
            c2[j] = s2;
            c3[j] = s3;
        }
    }
    for (; i < m; ++i) {
        double* crow = c + i * ldc;
        if (!accumulate) std::fill(crow, crow + n, 0.0);
        for (int64_t p = 0; p < k; ++p) {
            const double api = a[p * lda + i];
            const double* brow = b + p * ldb;
            for (int64_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void v_add(size_t n, const double* x, const double* y, double* out) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) out[i] = x[i] + y[i];
}

void v_mul(size_t n, const double* x, const double* y, double* out) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

void v_scale(size_t n, double a, const double* x, double* out) {
    const __m256d av = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) out[i] = a * x[i];
}

void v_axpy(size_t n, double a, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double v_sum(size_t n, const double* x) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double v_max(size_t n, const double* x) {
    double m = x[0];
    size_t i = 0;
    if (n >= 4) {
        __m256d acc = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
        __m128d lo = _mm256_castpd256_pd128(acc);
        __m128d hi = _mm256_extractf128_pd(acc, 1);
        lo = _mm_max_pd(lo, hi);
        m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
    } else {
        i = 1;
        m = x[0];
    }
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

void v_min_scalar(size_t n, const double* x, double cap, double* out) {
    const __m256d cv = _mm256_set1_pd(cap);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_min_pd(_mm256_loadu_pd(x + i), cv));
    }
    for (; i < n; ++i) out[i] = std::min(x[i], cap);
}

void v_clamp0(size_t n, const double* x, double* out) {
    const __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) out[i] = std::max(x[i], 0.0);
}

const Backend kAvx2 = {
    "avx2",  v_gemm_nn, v_gemm_nt, v_gemm_tn, v_add,        v_mul,
    v_scale, v_axpy,    v_sum,     v_max,     v_min_scalar, v_clamp0,
};

} // namespace

const Backend* avx2_lane() { return &kAvx2; }

} // namespace wegpipe::kernels
