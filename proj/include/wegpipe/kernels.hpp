#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace wegpipe::kernels {

// Dense double-precision kernels behind the tensor engine. A Backend is a
// table of function pointers; scalar reference implementations always exist,
// SIMD variants (AVX2 on x86-64, NEON on aarch64) are selected at runtime
// when the CPU supports them. All matrices are row-major.
//
// gemm_* compute C = op(A)*op(B), overwriting C unless `accumulate` is set,
// in which case they compute C += op(A)*op(B).
struct Backend {
    const char* name;

    // C[m x n] = A[m x k] * B[k x n]
    void (*gemm_nn)(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
                    const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate);
    // C[m x n] = A[m x k] * B[n x k]^T
    void (*gemm_nt)(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
                    const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate);
    // C[m x n] = A[k x m]^T * B[k x n]
    void (*gemm_tn)(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
                    const double* b, int64_t ldb, double* c, int64_t ldc, bool accumulate);

    void (*add)(size_t n, const double* x, const double* y, double* out);
    void (*mul)(size_t n, const double* x, const double* y, double* out);
    void (*scale)(size_t n, double a, const double* x, double* out);
    void (*axpy)(size_t n, double a, const double* x, double* y); // y += a*x
    double (*sum)(size_t n, const double* x);
    double (*max)(size_t n, const double* x);
    void (*min_scalar)(size_t n, const double* x, double cap, double* out); // out = min(x, cap)
    void (*clamp0)(size_t n, const double* x, double* out);                 // out = max(x, 0)
};

const Backend& scalar_backend();

// Currently active backend. Defaults to the widest lane the CPU supports;
// the WEGPIPE_KERNELS environment variable (scalar|avx2|neon|auto) pins it.
const Backend& active();

// Force a backend by name ("scalar", "avx2", "neon", "auto"). Throws
// ConfigError if the lane is unknown or unsupported on this machine.
void set_backend(const std::string& name);

// All lanes usable on this machine (scalar first).
std::vector<const Backend*> available_backends();

} // namespace wegpipe::kernels
