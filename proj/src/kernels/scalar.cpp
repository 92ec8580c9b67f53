#include "wegpipe/kernels.hpp"

#include <algorithm>
#include <cstring>

// Reference kernels. Plain loops, no reordering tricks: these define the
// semantics the SIMD lanes are equivalence-tested against.

namespace wegpipe::kernels {
namespace {

void s_gemm_nn(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        if (!accumulate) std::fill(crow, crow + n, 0.0);
        const double* arow = a + i * lda;
        for (int64_t p = 0; p < k; ++p) {
            const double aip = arow[p];
            const double* brow = b + p * ldb;
            for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void s_gemm_nt(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * lda;
        double* crow = c + i * ldc;
        for (int64_t j = 0; j < n; ++j) {
            const double* brow = b + j * ldb;
            double acc = 0.0;
            for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

void s_gemm_tn(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
               const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate) {
    if (!accumulate) {
        for (int64_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
    }
    for (int64_t p = 0; p < k; ++p) {
        const double* arow = a + p * lda;
        const double* brow = b + p * ldb;
        for (int64_t i = 0; i < m; ++i) {
            const double api = arow[i];
            double* crow = c + i * ldc;
            for (int64_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void s_add(size_t n, const double* x, const double* y, double* out) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void s_mul(size_t n, const double* x, const double* y, double* out) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void s_scale(size_t n, double a, const double* x, double* out) {
    for (size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void s_axpy(size_t n, double a, const double* x, double* y) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double s_sum(size_t n, const double* x) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double s_max(size_t n, const double* x) {
    double m = x[0];
    for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

void s_min_scalar(size_t n, const double* x, double cap, double* out) {
    for (size_t i = 0; i < n; ++i) out[i] = std::min(x[i], cap);
}

void s_clamp0(size_t n, const double* x, double* out) {
    for (size_t i = 0; i < n; ++i) out[i] = std::max(x[i], 0.0);
}

const Backend kScalar = {
    "scalar", s_gemm_nn, s_gemm_nt, s_gemm_tn, s_add,        s_mul,
    s_scale,  s_axpy,    s_sum,     s_max,     s_min_scalar, s_clamp0,
};

} // namespace

const Backend& scalar_backend() { return kScalar; }

} // namespace wegpipe::kernels
